//! Pointwise potential calculus: H, its force, the conjugate, the conjugate
//! prox and the bounded map γ_δ.

use degenflow::potentials::PotentialSpec;

fn main() -> degenflow::Result<()> {
    let spec = PotentialSpec::power(2.0)?;
    println!("q = {}, dual exponent p = {}", spec.q(), spec.p());
    for r in [0.5, 1.0, 1.5, 3.0] {
        let z = [r, 0.0];
        println!("|z| = {r:>3}: H = {:.4}, F = {:?}", spec.potential(z), spec.force(z));
    }
    for s in [0.0, 0.5, 2.0] {
        let sigma = [0.0, s];
        println!("H*({sigma:?}) = {:.4}, prox_0.1 = {:?}", spec.conjugate(sigma)?, spec.prox_conjugate(sigma, 0.1));
    }
    for delta in [0.1, 0.5, 1.0] {
        let floor = spec.ellipticity_floor(delta)?;
        let g = spec.gamma_delta(spec.force([2.5, 0.0]), delta, [1.0, 0.0])?;
        println!("delta {delta}: c = {floor:.4}, Lipschitz bound {:.4}, gamma(F(2.5,0)) = {g:.4}", 1.0 / floor);
    }

    // a regularized potential only has the numerical conjugate
    let reg = PotentialSpec::power(3.0)?.with_reg_eps(1e-3)?;
    let c = reg.conjugate_or_numerical([1.0, 1.0])?;
    println!("regularized q = 3: H*(1,1) = {:.6} (closed form: {})", c.value, c.closed_form);
    Ok(())
}
