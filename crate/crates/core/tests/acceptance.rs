//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::FRAC_PI_2;
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lieb_darboux::algebra::{
    anticommutator, chiral, hermitian_eigenvalues, s1, s1_tilde, s2, s2_tilde, s3, s3_tilde,
    ComplexMatrix3, Spinor3,
};
use lieb_darboux::cases::{build, probe_solutions, seed_for, CaseParams, CaseTag, SeedVariant};
use lieb_darboux::darboux::{
    apply_intertwiner, hermiticity_report, intertwining_residual, transformed_potential,
};
use lieb_darboux::free_model::{
    flat_band_solution, free_hamiltonian, gap_solution, threshold_solution, FlatBandProfile,
    Parity, SpinorFunction,
};
use lieb_darboux::grid::Grid;
use lieb_darboux::lattice::{band_scan, bands_at, expanded_hamiltonian, TBParams};
use lieb_darboux::scattering::{asymptotic_w, case_scatter};
use lieb_darboux::spectral::{case_spectrum, eigen_residual, norm_growth};
use lieb_darboux::C64;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn m3(rows: [[(f64, f64); 3]; 3]) -> ComplexMatrix3 {
    ComplexMatrix3(rows.map(|r| r.map(|(a, b)| c(a, b))))
}

fn grid(a: f64, b: f64, n: usize) -> Grid {
    Grid::new(a, b, n).unwrap()
}

fn criterion_1() -> Outcome {
    let o = (0.0, 0.0);
    let one = (1.0, 0.0);
    let i = (0.0, 1.0);
    let mi = (0.0, -1.0);
    let expected = [
        ("S1", s1(), m3([[o, one, o], [one, o, o], [o, o, o]])),
        ("S2", s2(), m3([[o, o, one], [o, o, o], [one, o, o]])),
        ("S3", s3(), m3([[o, o, o], [o, o, mi], [o, i, o]])),
        ("S1~", s1_tilde(), m3([[o, mi, o], [i, o, o], [o, o, o]])),
        ("S2~", s2_tilde(), m3([[o, o, mi], [o, o, o], [i, o, o]])),
        ("S3~", s3_tilde(), m3([[one, o, o], [o, (-1.0, 0.0), o], [o, o, o]])),
        ("S", chiral(), m3([[one, o, o], [o, (-1.0, 0.0), o], [o, o, one]])),
    ];
    for (name, got, want) in &expected {
        ensure(got == want, || format!("{name} differs: {got:?}"))?;
    }
    let s = chiral();
    for (name, m) in [("S1", s1()), ("S1~", s1_tilde())] {
        ensure(anticommutator(&s, &m) == ComplexMatrix3::ZERO, || format!("{{S,{name}}} != 0"))?;
    }
    Ok("7 matrices entry-exact, {S,S1} = {S,S1~} = 0".into())
}

fn criterion_2() -> Outcome {
    let g = grid(-10.0, 10.0, 2001);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (m, hv) in [(1.0, 1.0), (0.7, 1.4)] {
        let h = free_hamiltonian(m, hv).unwrap();
        let mut sols: Vec<SpinorFunction> = Vec::new();
        for f in [-0.9, -0.5, 0.0, 0.3, 0.75] {
            for p in [Parity::EvenA, Parity::OddA] {
                sols.push(gap_solution(f * m, m, hv, p).unwrap());
            }
        }
        for sign in [1, -1] {
            for (l0, l1) in [(c(1.0, 0.0), c(0.0, 0.0)), (c(0.0, 0.0), c(1.0, 0.0)), (c(0.3, -1.0), c(1.2, 0.4))] {
                sols.push(threshold_solution(sign, l0, l1, m, hv).unwrap());
            }
        }
        for profile in [
            FlatBandProfile::cosh(0.8),
            FlatBandProfile::sinh(0.5),
            FlatBandProfile::plane_wave(1.7),
            FlatBandProfile::poly_exp(&[1.0, -0.5, 0.2], -0.3),
            FlatBandProfile::gaussian_packet(0.5, 1.2, 2.0),
        ] {
            sols.push(flat_band_solution(&profile, m, hv));
        }
        for psi in &sols {
            let r = eigen_residual(&h, psi, psi.label().energy(), &g);
            ensure(r < 1e-10, || format!("residual {r:e} for {psi:?} (m={m}, hv={hv})"))?;
            worst = worst.max(r);
            count += 1;
        }
    }
    Ok(format!("{count} solutions, max residual {worst:.2e}"))
}

/// Independent closed forms of each transformed potential.
fn closed_form_potential(p: &CaseParams, x: f64) -> ComplexMatrix3 {
    let (m, e, hv) = (p.m, p.eps, p.hv);
    match p.tag {
        CaseTag::I => {
            let nu = (m * m - e * e).sqrt() / hv;
            let t = (nu * x).tanh();
            let sech2 = 1.0 / (nu * x).cosh().powi(2);
            let den = -m * m / (hv * hv * nu * nu) + t * t;
            let f = -hv * nu * t * sech2 / den;
            let mm = m * sech2 / den;
            s3() * (m + mm) + s1_tilde() * f
        }
        CaseTag::II => {
            let nu = (m * m - e * e).sqrt() / hv;
            let sigma = (m * (m + e)).sqrt() / hv;
            let (cs, cn) = ((sigma * x).cosh(), (nu * x).cosh());
            let (ts, tn) = ((sigma * x).tanh(), (nu * x).tanh());
            let delta = hv * sigma * cs * cn * (-(m * (m - e)).sqrt() / (m + e) + ts * tn);
            let f = e * cs * cn / delta * (-(m * (m - e)).sqrt() * ts + m * tn);
            let mm = m * (m * (m + e)).sqrt() * cs * cn / delta * (((m - e) / m).sqrt() - ts * tn);
            let d = (m - e) * (m * (m + e)).sqrt() * cs * cn / delta * ((m / (m - e)).sqrt() - ts * tn);
            let gg = m * e * cs * (nu * x).sinh() / delta;
            s3() * (m + mm) + s2() * gg + s1_tilde() * f + s3_tilde() * d
        }
        CaseTag::III => {
            let xi = (m * m + e * e).sqrt() / hv;
            (s1_tilde() * (m * m) + s2() * (e * m)) * ((xi * x).tanh() / (hv * xi))
        }
        CaseTag::IV => {
            let nu = (m * m - e * e).sqrt() / hv;
            s1_tilde() * (hv * nu * (nu * x).tanh()) - s3_tilde() * e
        }
    }
}

fn criterion_3() -> Outcome {
    let g = grid(-8.0, 8.0, 1601);
    let mut report = Vec::new();
    for tag in CaseTag::ALL {
        let p = CaseParams::reference(tag);
        let base = free_hamiltonian(p.m, p.hv).unwrap();
        let seed = seed_for(&p).unwrap();
        let mut worst: f64 = 0.0;
        for x in g.points() {
            let generic = transformed_potential(&seed, &base, x).map_err(|e| format!("case {tag}: {e}"))?;
            worst = worst.max(generic.max_diff(&closed_form_potential(&p, x)));
        }
        ensure(worst < 1e-10, || format!("case {tag}: deviation {worst:e}"))?;
        report.push(format!("{tag}: {worst:.1e}"));
    }
    Ok(report.join(", "))
}

fn criterion_4() -> Outcome {
    let g = grid(-10.0, 10.0, 2001);
    let flat = build(&CaseParams::reference(CaseTag::I)).unwrap();
    let h = hermiticity_report(flat.seed(), &flat.base, &g, 1e-12).map_err(|e| e.to_string())?;
    ensure(h.pass && h.max_defect <= 1e-12, || format!("flat-band seed defect {:e}", h.max_defect))?;
    let mut p = CaseParams::reference(CaseTag::I);
    p.variant = SeedVariant::NonFlat;
    let non_flat = build(&p).unwrap();
    let n = hermiticity_report(non_flat.seed(), &non_flat.base, &g, 1e-12).map_err(|e| e.to_string())?;
    ensure(n.max_defect >= 0.1, || format!("non-flat defect only {:e}", n.max_defect))?;
    Ok(format!(
        "flat-band defect {:.1e}, non-flat defect {:.3} at x = {:.3}",
        h.max_defect, n.max_defect, n.location
    ))
}

fn criterion_5() -> Outcome {
    let g = grid(-10.0, 10.0, 2001);
    let mut out = Vec::new();
    for tag in CaseTag::ALL {
        let case = build(&CaseParams::reference(tag)).unwrap();
        let probes = probe_solutions(case.params.m, case.params.hv).unwrap();
        ensure(probes.len() >= 10, || format!("only {} probes", probes.len()))?;
        let mut worst: f64 = 0.0;
        for psi in &probes {
            let r = intertwining_residual(&case.base, case.seed(), psi, &g).map_err(|e| e.to_string())?;
            ensure(r < 1e-9, || format!("case {tag}: residual {r:e} for {psi:?}"))?;
            worst = worst.max(r);
        }
        out.push(format!("{tag}: {} probes, {worst:.1e}", probes.len()));
    }
    Ok(out.join(", "))
}

fn criterion_6() -> Outcome {
    let want: [(CaseTag, Vec<f64>); 4] = [
        (CaseTag::I, vec![-0.75, 0.0, 0.75]),
        (CaseTag::II, vec![-0.25, 0.0]),
        (CaseTag::III, vec![0.0]),
        (CaseTag::IV, vec![0.5]),
    ];
    let mut out = Vec::new();
    for (tag, expected) in want {
        let case = build(&CaseParams::reference(tag)).unwrap();
        let r = case_spectrum(&case, 400).map_err(|e| format!("case {tag}: {e}"))?;
        ensure(r.found_energies.len() == expected.len(), || {
            format!("case {tag}: found {:?}, expected {expected:?}", r.found_energies)
        })?;
        for (f, e) in r.found_energies.iter().zip(&expected) {
            ensure((f - e).abs() <= 1e-8, || format!("case {tag}: {f} vs {e}"))?;
        }
        for res in &r.residuals {
            ensure(matches!(res, Some(v) if *v < 1e-10), || format!("case {tag}: residual {res:?}"))?;
        }
        out.push(format!("{tag}: {:?}", r.found_energies));
    }
    let case2 = build(&CaseParams::reference(CaseTag::II)).unwrap();
    let growth = norm_growth(&case2.missing_states()[0], 20.0, 40.0);
    ensure(growth > 0.1, || format!("case II threshold-state norm grew only {growth}"))?;
    out.push(format!("II norm growth 20->40: {:.0}%", 100.0 * growth));
    Ok(out.join("; "))
}

fn criterion_7() -> Outcome {
    let energies = [1.1, 1.5, 2.0, 3.0, 5.0];
    let mut out = Vec::new();
    for tag in CaseTag::ALL {
        let case = build(&CaseParams::reference(tag)).unwrap();
        let mut worst_r: f64 = 0.0;
        let mut worst_flux: f64 = 0.0;
        for r in case_scatter(&case, &energies) {
            let r = r.map_err(|e| format!("case {tag}: {e}"))?;
            ensure(r.reflection < 1e-6, || format!("case {tag}: |r|^2 = {:e} at {}", r.reflection, r.energy))?;
            let flux = (r.reflection + r.transmission - 1.0).abs();
            ensure(flux < 1e-8, || format!("case {tag}: flux error {flux:e} at {}", r.energy))?;
            let (m1, p1) = (r.w_minus.unwrap(), r.w_plus.unwrap());
            let (m2, p2) = asymptotic_w(case.seed(), 2.0 * r.length).map_err(|e| e.to_string())?;
            let drift = m1.max_diff(&m2).max(p1.max_diff(&p2));
            ensure(drift < 1e-10, || format!("case {tag}: W drift {drift:e}"))?;
            worst_r = worst_r.max(r.reflection);
            worst_flux = worst_flux.max(flux);
        }
        out.push(format!("{tag}: |r|^2 <= {worst_r:.0e}, flux {worst_flux:.0e}"));
    }
    Ok(out.join(", "))
}

fn criterion_8() -> Outcome {
    let regime1 = TBParams::symmetric(1.0, 0.3);
    let regime2 = [
        TBParams::symmetric(1.0, 0.0),
        TBParams {
            tau1: 1.0,
            tau2: 0.8,
            tau3: 0.6,
            tau4: 0.4,
            ..TBParams::default()
        },
    ];
    let formula1 = |p: &TBParams, kx: f64, ky: f64| {
        let (cx, cy, sx, sy) = ((p.a * kx).cos(), (p.a * ky).cos(), (p.a * kx).sin(), (p.a * ky).sin());
        2.0 * (p.tau1.powi(2) * cx * cx + p.tau2.powi(2) * cy * cy + 4.0 * p.t3.powi(2) * (sx * sy).powi(2)).sqrt()
    };
    let formula2 = |p: &TBParams, kx: f64, ky: f64| {
        (p.tau1.powi(2) + p.tau2.powi(2) + p.tau3.powi(2) + p.tau4.powi(2)
            + 2.0 * p.tau1 * p.tau3 * (2.0 * p.a * kx).cos()
            + 2.0 * p.tau2 * p.tau4 * (2.0 * p.a * ky).cos())
        .max(0.0)
        .sqrt()
    };
    let mut worst_flat: f64 = 0.0;
    let mut worst_formula: f64 = 0.0;
    let mut sets: Vec<(TBParams, bool)> = vec![(regime1, true)];
    sets.extend(regime2.iter().map(|p| (*p, false)));
    for (p, first) in sets {
        let s = band_scan(&p, 100).map_err(|e| e.to_string())?;
        for i in 0..s.nk {
            for j in 0..s.nk {
                let (kx, ky) = s.k_point(i, j);
                let e = s.at(i, j);
                let f = if first { formula1(&p, kx, ky) } else { formula2(&p, kx, ky) };
                worst_flat = worst_flat.max(e[1].abs());
                worst_formula = worst_formula.max((e[2] - f).abs()).max((e[0] + f).abs());
            }
        }
    }
    ensure(worst_flat <= 1e-12, || format!("middle band deviates by {worst_flat:e}"))?;
    ensure(worst_formula < 1e-10, || format!("formula mismatch {worst_formula:e}"))?;
    let k0 = bands_at((FRAC_PI_2, FRAC_PI_2), &regime1).unwrap();
    ensure((k0[2] - 1.2).abs() < 1e-12 && (k0[0] + 1.2).abs() < 1e-12, || format!("E(K0) = {k0:?}"))?;
    let origin = bands_at((0.0, 0.0), &regime2[0]).unwrap();
    ensure((origin[2] - 2.828427).abs() < 1e-6 && (origin[0] + 2.828427).abs() < 1e-6, || {
        format!("E(0) = {origin:?}")
    })?;
    Ok(format!("|E0| <= {worst_flat:.0e}, formula error {worst_formula:.0e}, E(K0) = +-1.2, E(0) = +-{:.6}", origin[2]))
}

fn criterion_9() -> Outcome {
    let params = [
        TBParams::symmetric(1.0, 0.1),
        TBParams {
            tau1: 1.1,
            tau3: 0.9,
            tau2: 1.0,
            tau4: 0.95,
            t3: 0.1,
            mu_a: 0.02,
            mu_b: -0.01,
            mu_c: 0.03,
            ..TBParams::default()
        },
    ];
    let err_at = |p: &TBParams, size: f64| {
        let (kx0, ky0) = p.dirac_point();
        (0..8)
            .map(|d| {
                let th = d as f64 * std::f64::consts::PI / 4.0 + 0.3;
                let dk = (size / p.a * th.cos(), size / p.a * th.sin());
                let exact = bands_at((kx0 + dk.0, ky0 + dk.1), p).unwrap();
                let approx = hermitian_eigenvalues(&expanded_hamiltonian(dk, p));
                (0..3).map(|b| (exact[b] - approx[b]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    let mut out = Vec::new();
    for p in &params {
        let e1 = err_at(p, 0.01);
        let e2 = err_at(p, 0.001);
        let ratio = e1 / e2;
        ensure(e1 < 1e-3, || format!("error {e1:e} at |dk|a = 0.01"))?;
        ensure((50.0..200.0).contains(&ratio), || format!("error ratio {ratio} (expected ~100)"))?;
        out.push(format!("{e1:.1e} -> {e2:.1e} (x{ratio:.0})"));
    }
    Ok(out.join(", "))
}

fn criterion_10() -> Outcome {
    let p = CaseParams::reference(CaseTag::IV);
    let base = free_hamiltonian(p.m, p.hv).unwrap();
    let seed = seed_for(&p).unwrap();
    let nu = (p.m * p.m - p.eps * p.eps).sqrt() / p.hv;
    let g = grid(-10.0, 10.0, 2001);
    let (mut third, mut block): (f64, f64) = (0.0, 0.0);
    for x in g.points() {
        let v = transformed_potential(&seed, &base, x).map_err(|e| e.to_string())?;
        for j in 0..3 {
            third = third.max(v[(2, j)].norm()).max(v[(j, 2)].norm());
        }
        // hv·ν·tanh(νx)·σ₂ − ε·σ₃
        let a = p.hv * nu * (nu * x).tanh();
        let want = [[c(-p.eps, 0.0), c(0.0, -a)], [c(0.0, a), c(p.eps, 0.0)]];
        for i in 0..2 {
            for j in 0..2 {
                block = block.max((v[(i, j)] - want[i][j]).norm());
            }
        }
    }
    ensure(third < 1e-12, || format!("third row/column reaches {third:e}"))?;
    ensure(block < 1e-10, || format!("upper block deviates by {block:e}"))?;

    let nu0 = p.m / p.hv;
    let mut worst: f64 = 0.0;
    for profile in [
        FlatBandProfile::cosh(0.3),
        FlatBandProfile::gaussian_packet(-0.5, 1.5, 1.1),
        FlatBandProfile::poly_exp(&[0.5, 1.0], 0.2),
    ] {
        let psi = flat_band_solution(&profile, p.m, p.hv);
        for x in grid(-6.0, 6.0, 241).points() {
            let lp = apply_intertwiner(&seed, &psi, x).map_err(|e| e.to_string())?;
            let want = Spinor3::new(
                c(0.0, 0.0),
                c(0.0, 0.0),
                -(profile.chi_double_prime(x) - profile.chi(x) * (nu0 * nu0)) * p.hv,
            );
            let err = (lp - want).norm_inf() / want.norm_inf().max(1.0);
            worst = worst.max(err);
        }
    }
    ensure(worst < 1e-10, || format!("flat-band image deviates by {worst:e}"))?;
    Ok(format!("third row/col {third:.0e}, block {block:.0e}, flat-band map {worst:.0e}"))
}

fn run_cli(args: &[&str], threads: &str) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_lieb-darboux"))
        .args(args)
        .env("DARBOUX_THREADS", threads)
        .output()
        .expect("spawn CLI");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "case = \"II\"\nn = 401\nnk = 40\nn-scan = 200\nenergies = [1.1, 2.0, 5.0]\n[lattice]\nt3 = 0.3\n",
    )
    .map_err(|e| e.to_string())?;
    let cfg = cfg.to_str().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    for cmd in ["bands", "case", "verify", "scatter", "spectrum"] {
        for format in ["csv", "json"] {
            let a = path(&format!("{cmd}-a.{format}"));
            let b = path(&format!("{cmd}-b.{format}"));
            let (ca, _) = run_cli(&[cmd, "--config", cfg, "--format", format, "--out", &a], "1");
            let (cb, _) = run_cli(&[cmd, "--config", cfg, "--format", format, "--out", &b], "3");
            ensure(ca == 0 && cb == 0, || format!("{cmd} {format}: exit {ca}/{cb}"))?;
            let (fa, fb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
            ensure(!fa.is_empty() && fa == fb, || format!("{cmd} {format}: outputs differ"))?;
        }
        let (c1, s1) = run_cli(&[cmd, "--config", cfg], "2");
        let (c2, s2) = run_cli(&[cmd, "--config", cfg], "4");
        ensure(c1 == 0 && c2 == 0 && s1 == s2 && !s1.is_empty(), || format!("{cmd}: stdout differs"))?;
    }
    ensure(Path::new(&path("case-a.csv.report.json")).exists(), || "case sidecar report missing".into())?;

    let bad: [(&[&str], i32); 10] = [
        (&["bands", "--a", "0"], 2),
        (&["case", "--eps", "1.5"], 2),
        (&["verify", "--eps", "1.5"], 2),
        (&["scatter", "--eps", "1.5"], 2),
        (&["spectrum", "--eps", "1.5"], 2),
        (&["verify", "--seed-variant", "non-flat", "--n", "401"], 1),
        (&["case", "--seed-variant", "sinh", "--n", "401"], 3),
        (&["scatter", "--seed-variant", "sinh", "--n", "401"], 3),
        (&["spectrum", "--seed-variant", "sinh", "--n", "401"], 3),
        (&["bands", "--lambda-phase", "1.0"], 2),
    ];
    for (args, want) in bad {
        let (code, _) = run_cli(args, "2");
        ensure(code == want, || format!("{args:?}: exit {code}, expected {want}"))?;
    }
    Ok("5 commands x 2 formats byte-identical across runs and thread counts; exit codes 0/1/2/3 honored".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("spin-algebra exactness", criterion_1),
        ("free-solution catalog residuals", criterion_2),
        ("generic vs closed-form potentials", criterion_3),
        ("hermiticity dichotomy", criterion_4),
        ("intertwining identity", criterion_5),
        ("bound-state spectra", criterion_6),
        ("reflectionless scattering", criterion_7),
        ("flat-band exactness", criterion_8),
        ("low-energy expansion", criterion_9),
        ("case IV reduction", criterion_10),
        ("CLI reproducibility and exit codes", criterion_11),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2}s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
