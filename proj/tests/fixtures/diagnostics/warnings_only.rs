fn main() {
    let unused = 5;
}
