fn main() {
    let m = HashMap::<i32, i32>::new();
    println!("{}", m.len());
}
