fn main() {
    println!("weilrep CLI placeholder");
}
