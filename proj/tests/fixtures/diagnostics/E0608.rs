fn main() {
    let n: u8 = 0;
    println!("{}", n[0]);
}
