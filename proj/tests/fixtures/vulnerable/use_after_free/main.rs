use std::io::Read;

fn main() {
    let mut s = String::new();
    std::io::stdin().read_to_string(&mut s).unwrap();
    let n: i32 = s.trim().parse().unwrap();
    let mut p: Option<Box<i32>> = Some(Box::new(n));
    if n > 0 {
        p = None;
    }
    println!("{}", p.expect("value used after release"));
}
