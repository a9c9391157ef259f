fn main() {
    let n: i32 = 7;
    println!("{}", n.length());
}
