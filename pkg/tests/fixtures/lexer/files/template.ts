const query = `
  SELECT * FROM t -- // not a ts comment
  /* also inert */
`;
const plain = "x"; // follows a string
