struct Grid;
struct Grid;

fn main() {}
