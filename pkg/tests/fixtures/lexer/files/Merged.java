public class Merged {
    // alpha
    // beta

    // gamma
    int x; // delta
    // epsilon
}
