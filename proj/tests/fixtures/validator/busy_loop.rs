use std::io::Read;

fn main() {
    let mut s = String::new();
    std::io::stdin().read_to_string(&mut s).unwrap();
    let v: Vec<i64> = s.split_whitespace().map(|x| x.parse().unwrap()).collect();
    let mut k = v[0];
    while k >= 0 {
        k = (k + 1) % 1000;
    }
    println!("{}", k);
}
