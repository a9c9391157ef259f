fn main() {
    let v = Vec::<i32>::new();
    v.push(1);
    println!("{:?}", v);
}
