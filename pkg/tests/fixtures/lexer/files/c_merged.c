// first line of a group
// second line of the group
// third line
static int v;
// solo after code

// new group line one
//
// new group line three
