/** Doxygen-style summary. */
class Widget {
  /* interior
     block */
  int f() { return 1; } // trailing
};
