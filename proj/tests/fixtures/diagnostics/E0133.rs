unsafe fn peek(p: *const i32) -> i32 {
    *p
}

fn main() {
    let x = 4;
    println!("{}", peek(&x));
}
