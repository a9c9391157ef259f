use std::collections::FancyMap;

fn main() {
    println!("hi");
}
