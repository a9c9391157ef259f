use std::io::Read;
use std::process;

fn main() {
    let mut s = String::new();
    std::io::stdin().read_to_string(&mut s).unwrap();
    let v: Vec<i32> = s.split_whitespace().map(|x| x.parse().unwrap()).collect();
    match v[0].checked_mul(v[1]) {
        Some(product) => println!("{}", product),
        None => {
            eprintln!("error: multiplication overflow");
            process::exit(1);
        }
    }
}
