fn main() {
    let base = 3;
    fn scaled(x: i32) -> i32 {
        x * base
    }
    println!("{}", scaled(2));
}
