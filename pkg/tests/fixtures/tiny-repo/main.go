package main

// hack: skip validation for now
func main() {}

/* block remark */
