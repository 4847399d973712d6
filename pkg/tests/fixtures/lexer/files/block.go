package main

/* build tags were here
now a plain block */
func main() {} /* tail */
