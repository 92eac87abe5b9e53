//! Cost model of a six-stage stream where two stages reuse an existing
//! generator, and the logarithmic growth of replay calls.

use clgid::ledger::{cost_report, replay_cost_naive, replay_cost_reuse_closed, verify_log_bound, CostConstants};

pub fn run_example() -> clgid::Result<()> {
    let c = CostConstants {
        p_g: 2.0e5,
        e_g: 10.0,
        b_g: 4.0,
        f_g_train: 1.0e6,
        f_r: 2.0e4,
        e_d: 20.0,
        b_d: 4.0,
        f_d_train: 3.0e6,
        ..CostConstants::default()
    };
    let sizes = [120, 100, 100, 80, 150, 100];
    let deltas = [true, true, false, true, false, true];
    let r = cost_report(&c, &sizes, &deltas)?;
    println!("stage  M  gen  flops_gan  flops_replay  flops_dnet  calls(naive/reuse)");
    for (n, s) in r.per_stage.iter().enumerate() {
        println!(
            "{:>5} {:>3} {:>4} {:>10.2e} {:>13.2e} {:>11.2e}  {}/{}",
            n + 1, sizes[n], u8::from(deltas[n]), s.flops_gan, s.flops_replay, s.flops_dnet, s.naive_calls, s.reuse_calls
        );
    }
    let t = r.total();
    println!("total: gan {:.2e}, replay {:.2e}, restorer {:.2e}; generator params {:.1e}", t.flops_gan, t.flops_replay, t.flops_dnet, r.p_gan);

    println!("\n  N   naive   reuse");
    for n in [2, 4, 8, 16, 32, 64] {
        let s = vec![100; n];
        println!("{n:>3} {:>7} {:>7}", replay_cost_naive(&s), replay_cost_reuse_closed(&s));
    }
    let b = verify_log_bound(100, 64)?;
    println!("C_N <= {:.3} * M (ln(N-1) + 1) for N in 4..=64: {}", b.constant, if b.pass { "holds" } else { "violated" });
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
