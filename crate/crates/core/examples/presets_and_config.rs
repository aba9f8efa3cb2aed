//! Bundled parameter presets and the `key = value` configuration format.

use ch_inpaint::config::{apply_config, parse_config, preset, PRESETS};

fn main() -> ch_inpaint::Result<()> {
    println!(
        "{:<6} {:>10} {:>10} {:>8} {:>8} {:>8} {:>10}",
        "name", "eps1", "eps2", "alpha", "alpha2", "tau", "mode"
    );
    for (name, _) in PRESETS {
        let cfg = parse_config(preset(name).expect("listed preset"))?;
        println!(
            "{name:<6} {:>10.4e} {:>10.4e} {:>8.0e} {:>8.0e} {:>8.0e} {:>10}",
            cfg.eps1,
            cfg.eps2,
            cfg.alpha,
            cfg.alpha2,
            cfg.tau,
            format!("{:?}", cfg.mode)
        );
    }

    // a file layered over a preset; later keys win
    let mut cfg = parse_config(preset("fig1").expect("bundled preset"))?;
    apply_config(
        &mut cfg,
        "# sharper run\npotential = my\ndelta = 1e-4\ntau = 5e-6\n",
    )?;
    let schedule = cfg.schedule()?;
    println!(
        "\nlayered: potential {:?}, tau {:e}, stop tolerances {:?}",
        cfg.potential_spec()?,
        schedule.stage1.tau,
        cfg.stop_tols()
    );

    match parse_config("eps1 = 0.04\nalpha = -3\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("negative alpha is invalid"),
    }
    Ok(())
}
