fn main() {
    let total: i32 = 5;
    let scale: f64 = 2.0;
    println!("{}", total * scale);
}
