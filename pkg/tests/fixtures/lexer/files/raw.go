package main

var tmpl = `
// not a comment inside raw string
/* nor this */
`

// real go comment
var s = "quoted // still string"
