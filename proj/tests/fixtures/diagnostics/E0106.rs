struct Holder {
    name: &str,
}

fn main() {
    let h = Holder { name: "a" };
    println!("{}", h.name);
}
