use std::io::Read;

fn main() {
    let mut s = String::new();
    std::io::stdin().read_to_string(&mut s).unwrap();
    let n: i32 = s.trim().parse().unwrap();
    let value = 7;
    let mut p: Option<&i32> = Some(&value);
    if n == 0 {
        p = None;
    }
    println!("{}", p.unwrap());
}
