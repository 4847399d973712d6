/**
 * Finds a root by bisection.
 * @param tol tolerance
 */
public class JavaDoc {
    // marker inside "string // not comment"
    String s = "// nope";
}
