fn main() {
    let mut value = 10;
    let r = &value;
    value = 20;
    println!("{}", r);
}
