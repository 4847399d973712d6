package main

// Package-level doc sentence one.
// Sentence two continues.
func f() int {
	return 1 // inline note
}
