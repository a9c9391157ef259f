fn main() {
    let count: usize = "three";
    println!("{}", count);
}
