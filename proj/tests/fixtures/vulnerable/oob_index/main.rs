use std::io::Read;

fn main() {
    let mut s = String::new();
    std::io::stdin().read_to_string(&mut s).unwrap();
    let n: i64 = s.trim().parse().unwrap();
    let mut a: Vec<i32> = (0..10).collect();
    a[n as usize] = 42;
    println!("{}", a[0]);
}
