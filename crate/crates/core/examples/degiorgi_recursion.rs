//! The recursion Y_(n+1) = c bⁿ Y_n^(1+β) started at and above its threshold.

use degenflow::regularity::{beta_from_surplus, degiorgi_recursion, degiorgi_threshold};

fn main() {
    let (c, b) = (1.0, 4.0);
    let beta = beta_from_surplus(1.0);
    let y = degiorgi_threshold(c, b, beta);
    println!("c {c}, b {b}, beta {beta:.4}: threshold {y:.3e}");
    for factor in [1.0, 1.5, 2.0] {
        let (seq, converged) = degiorgi_recursion(c, b, beta, factor * y, 12);
        let tail: Vec<String> = seq.iter().map(|v| format!("{v:.2e}")).collect();
        println!("start x{factor}: converged {converged}\n  {}", tail.join(" "));
    }
}
