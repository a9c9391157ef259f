fn consume(s: String) -> usize {
    s.len()
}

fn main() {
    let s = String::from("abc");
    let n = consume(s);
    println!("{} {}", n, s);
}
