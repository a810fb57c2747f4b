use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use hsrecon_core::checks::{crofton_unit, radon_halfspace_residual, CheckRow, RadialBump};
use hsrecon_core::fixtures::Gaussian;
use hsrecon_core::inversion::ReconstructionReport;
use hsrecon_core::io::{axis_profile_csv, slice_last_axis, write_grid, write_pgm, write_report};
use hsrecon_core::{
    alpha_n, c_const, fibonacci_sphere, potential_direct, potential_from_halfspaces, potential_grid, radon_forward,
    radon_invert_odd_grid, random_halfspaces, reconstruct, reconstruct_embedded, sample_sphere, sphere_area,
    CroftonSampler, DiscreteMeasure, GridDensity, GridSpec, HalfSpace, Measure, PGrid, Vector,
};

use crate::source::{cube, parse_bounds, Source};
use crate::{CliError, CliResult, Command, ConstantsArgs, ForwardArgs, RadonArgs, RunArgs, VerifyArgs};

/// Parameters after defaults and dimension rules have been applied.
#[derive(Serialize, Default)]
struct Resolved {
    dim: usize,
    m: Option<u32>,
    bounds: (f64, f64),
    h: f64,
    samples: Option<usize>,
    seed: u64,
    mollify_width: Option<f64>,
    dp: Option<f64>,
    inv_h: Option<f64>,
}

#[derive(Serialize)]
struct RunConfig<'a> {
    command: &'a Command,
    resolved: Resolved,
}

fn prepare_dir(out: &Path, command: &Command, resolved: Resolved) -> CliResult<()> {
    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), &RunConfig { command, resolved })
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

fn parse_halfspaces(text: &str, dim: usize) -> CliResult<Vec<HalfSpace>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::Io(format!("half-space line {}: {msg}", i + 1));
        let nums: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("'{}': {e}", f.trim()))))
            .collect::<CliResult<_>>()?;
        if nums.len() != dim + 1 {
            return Err(bad(format!("expected {} fields, found {}", dim + 1, nums.len())));
        }
        let hs = HalfSpace::new(Vector::new(nums[..dim].to_vec()), nums[dim]).map_err(|e| bad(e.to_string()))?;
        out.push(hs);
    }
    Ok(out)
}

pub fn forward(a: &ForwardArgs) -> CliResult<()> {
    let src = Source::load(&a.input)?;
    let n = src.dim();
    let spaces = match (&a.halfspaces, a.random) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            parse_halfspaces(&text, n)?
        }
        (None, Some(count)) => random_halfspaces(n, count, a.radius, a.seed)?,
        (None, None) => return Err(CliError::Usage("forward needs --halfspaces FILE or --random N".into())),
    };
    let query = src.query();
    let mut s = String::new();
    let header: Vec<String> = (1..=n).map(|i| format!("omega{i}")).collect();
    let _ = writeln!(s, "{},p,mass", header.join(","));
    for hs in &spaces {
        for c in hs.omega().as_slice() {
            let _ = write!(s, "{c:?},");
        }
        let _ = writeln!(s, "{:?},{:?}", hs.offset(), query.mass(hs)?);
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&a.out, s)?;
    Ok(())
}

fn resolved_run(a: &RunArgs, spec: &GridSpec, m: Option<u32>, mollify_width: Option<f64>) -> CliResult<Resolved> {
    Ok(Resolved {
        dim: spec.dim(),
        m,
        bounds: parse_bounds(&a.grid)?,
        h: a.grid.h,
        samples: (spec.dim() > 1).then_some(a.samples),
        seed: a.seed,
        mollify_width,
        ..Resolved::default()
    })
}

/// Grid of the requested dimension over `--bounds` with spacing `--h`.
fn run_grid(a: &RunArgs, dim: usize) -> CliResult<GridSpec> {
    cube(&a.grid, dim)
}

#[derive(Serialize)]
struct PotentialSummary {
    dim: usize,
    nodes: usize,
    total_mass: f64,
    max_mc_error: f64,
    /// Worst deviation from the potential computed from the measure itself,
    /// when the measure is available.
    max_direct_deviation: Option<f64>,
}

pub fn potential(a: &RunArgs, config: &Command) -> CliResult<()> {
    let src = Source::load(&a.input)?;
    let mut query = src.query();
    let mut dim = src.dim();
    if a.embed {
        query = hsrecon_core::embed_query(&query);
        dim += 1;
    }
    let spec = run_grid(a, dim)?;
    let sampler = CroftonSampler::new(dim, a.samples, a.seed)?;
    let total = src.total();
    let field = potential_grid(&query, total, &spec, &sampler)?;
    let direct = match src.as_measure() {
        Some(mu) if !a.embed => {
            let mut worst = 0.0f64;
            for (i, v) in field.grid.values().iter().enumerate() {
                worst = worst.max((potential_direct(mu, &spec.node(i))? - v).abs());
            }
            Some(worst)
        }
        _ => None,
    };
    prepare_dir(&a.out, config, resolved_run(a, &spec, None, None)?)?;
    write_grid(&a.out.join("potential"), &field.grid)?;
    if let Some(err) = &field.mc_error {
        write_grid(&a.out.join("mc_error"), err)?;
    }
    fs::write(a.out.join("profile.csv"), axis_profile_csv(&field.grid))?;
    let summary = PotentialSummary {
        dim,
        nodes: spec.len(),
        total_mass: total,
        max_mc_error: field.max_mc_error(),
        max_direct_deviation: direct,
    };
    write_json(&a.out.join("summary.json"), &summary)?;
    println!("potential on {} nodes, max MC standard error {:.3e}", spec.len(), summary.max_mc_error);
    Ok(())
}

fn default_mollify(m: u32, requested: Option<f64>) -> Option<f64> {
    match requested {
        Some(w) if w > 0.0 => Some(w),
        Some(_) => None,
        None if m >= 2 => Some(1.0),
        None => None,
    }
}

fn write_images(out: &Path, grid: &GridDensity) -> CliResult<()> {
    match grid.dim() {
        2 => write_pgm(&out.join("density.pgm"), grid)?,
        3 => {
            let mid = grid.spec().shape()[2] / 2;
            write_pgm(&out.join("slice.pgm"), &slice_last_axis(grid, mid)?)?;
        }
        _ => {}
    }
    Ok(())
}

fn print_report(report: &ReconstructionReport) {
    let mut line = format!("total mass {:.6}", report.total_mass);
    if let Some(e) = report.expected_mass {
        let _ = write!(line, " (expected {e:.6})");
    }
    if let Some(l1) = report.l1_error {
        let _ = write!(line, ", relative L1 error {l1:.4}");
    }
    let _ = write!(line, ", negative mass {:.3e}", report.negative_mass);
    println!("{line}");
}

pub fn reconstruct_cmd(a: &RunArgs, config: &Command) -> CliResult<()> {
    let src = Source::load(&a.input)?;
    let d = src.dim();
    let total = src.total();
    let query = src.query();
    if a.embed {
        if d % 2 != 0 {
            return Err(CliError::Usage(format!("--embed needs an even dimension, input has {d}")));
        }
        let m = (d as u32 + 2) / 2;
        check_m(a.m, m)?;
        let spec = run_grid(a, d + 1)?;
        let sampler = CroftonSampler::new(d + 1, a.samples, a.seed)?;
        let mollify = default_mollify(m, a.mollify);
        let (lifted, slab) = reconstruct_embedded(&query, total, &spec, &sampler, mollify)?;
        let mut report = lifted.clone();
        report.density = slab;
        report.negative_mass = report.density.negative_mass();
        report.total_mass = Measure::total_mass(&report.density);
        if let Some(g) = src.truth() {
            report.compare_with(|x| g.density(x));
        }
        prepare_dir(&a.out, config, resolved_run(a, &spec, Some(m), mollify)?)?;
        write_report(&a.out.join("lifted"), &lifted)?;
        write_report(&a.out.join("density"), &report)?;
        fs::write(a.out.join("profile.csv"), axis_profile_csv(&report.density))?;
        write_images(&a.out, &report.density)?;
        print_report(&report);
        return Ok(());
    }
    if d % 2 == 0 {
        return Err(CliError::Usage(format!(
            "direct inversion needs an odd dimension; use --embed for dimension {d}"
        )));
    }
    let m = (d as u32).div_ceil(2);
    check_m(a.m, m)?;
    let spec = run_grid(a, d)?;
    let sampler = CroftonSampler::new(d, a.samples, a.seed)?;
    let mollify = default_mollify(m, a.mollify);
    let mut report = reconstruct(&query, total, &spec, &sampler, m, mollify)?;
    if let Some(g) = src.truth() {
        report.compare_with(|x| g.density(x));
    }
    prepare_dir(&a.out, config, resolved_run(a, &spec, Some(m), mollify)?)?;
    write_report(&a.out.join("density"), &report)?;
    fs::write(a.out.join("profile.csv"), axis_profile_csv(&report.density))?;
    write_images(&a.out, &report.density)?;
    print_report(&report);
    Ok(())
}

fn check_m(requested: Option<u32>, m: u32) -> CliResult<()> {
    match requested {
        Some(r) if r != m => Err(CliError::Usage(format!("--m {r} does not match the grid dimension (m = {m})"))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct RadonSummary {
    directions: usize,
    offsets: usize,
    inversion_total_mass: Option<f64>,
    l1_error: Option<f64>,
}

pub fn radon(a: &RadonArgs, config: &Command) -> CliResult<()> {
    let src = Source::load(&a.input)?;
    let n = src.dim();
    let spec = cube(&a.grid, n)?;
    let f = src.to_grid(&spec)?;
    let dp = a.dp.unwrap_or(a.grid.h);
    let dirs = match (a.spiral, n) {
        (false, _) => sample_sphere(n, a.directions, a.seed)?,
        (true, 3) => fibonacci_sphere(a.directions),
        (true, _) => return Err(CliError::Usage("--spiral needs dimension 3".into())),
    };
    let pgrid = PGrid::symmetric(spec.max_node_norm() + dp, dp)?;
    let sino = radon_forward(&f, &dirs, &pgrid)?;
    let inv_h = (n % 2 == 1).then(|| a.inv_h.unwrap_or(2.0 * a.grid.h));
    let resolved = Resolved {
        dim: n,
        bounds: parse_bounds(&a.grid)?,
        h: a.grid.h,
        samples: Some(dirs.len()),
        seed: a.seed,
        dp: Some(dp),
        inv_h,
        ..Resolved::default()
    };
    prepare_dir(&a.out, config, resolved)?;
    fs::write(a.out.join("sinogram.csv"), sino.to_text())?;
    let mut summary = RadonSummary { directions: dirs.len(), offsets: pgrid.np, inversion_total_mass: None, l1_error: None };
    if let Some(inv_h) = inv_h {
        let (lo, hi) = parse_bounds(&a.grid)?;
        let inv_spec = GridSpec::cube(n, lo, hi, inv_h)?;
        let g = radon_invert_odd_grid(&sino, &inv_spec)?;
        summary.inversion_total_mass = Some(Measure::total_mass(&g));
        if let Some(truth) = src.truth() {
            let mut buf = vec![0.0; n];
            let (mut diff, mut mass) = (0.0, 0.0);
            for (i, v) in g.values().iter().enumerate() {
                g.spec().node_into(i, &mut buf);
                let t = truth.density(&buf);
                diff += (v - t).abs();
                mass += t.abs();
            }
            summary.l1_error = Some(diff / mass);
        }
        write_grid(&a.out.join("inverse"), &g)?;
        write_images(&a.out, &g)?;
    }
    write_json(&a.out.join("summary.json"), &summary)?;
    println!(
        "{} directions x {} offsets{}",
        summary.directions,
        summary.offsets,
        summary.l1_error.map(|e| format!(", inversion relative L1 error {e:.4}")).unwrap_or_default()
    );
    Ok(())
}

/// All identity checks with their tolerances.
pub fn verification_rows(samples: usize, seed: u64) -> CliResult<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for n in [2usize, 3, 5] {
        let est = crofton_unit(n, samples, seed)?;
        rows.push(CheckRow::absolute(format!("crofton_unit_n{n}"), est.value, 1.0, 0.01));
    }
    let pairings = [(1u32, 4001usize), (2, 65)];
    for (m, cells) in pairings {
        let n = 2 * m as usize - 1;
        let mut center = vec![0.0; n];
        center[0] = 0.2;
        let bump = RadialBump::new(n, center.clone(), 1.0, 2 * m + 2)?;
        let value = bump.potential_pairing(m, &center, cells) / bump.value(&center);
        rows.push(CheckRow::relative(format!("c_{m}"), value, c_const(m)?, 0.01));
    }
    // Half-space masses of a gridded Gaussian against its sinogram.
    let spec = GridSpec::cells(2, -6.0, 6.0, 0.05)?;
    let f = Gaussian::standard(2).grid(spec.clone());
    let dirs = sample_sphere(2, 16, seed)?;
    let pgrid = PGrid::symmetric(spec.max_node_norm() + 0.05, 0.05)?;
    let offsets = [-1.5, -0.7, 0.0, 0.3, 1.1, 2.0];
    let resid = radon_halfspace_residual(&f, &dirs, &pgrid, &offsets)?;
    rows.push(CheckRow::absolute("radon_cumulative", resid, 0.0, 1e-3));
    // The line needs no sampling: both routes to the potential must agree.
    let mu = DiscreteMeasure::new(
        vec![Vector::new(vec![-1.3]), Vector::new(vec![0.4]), Vector::new(vec![2.25])],
        vec![0.5, 1.25, 0.75],
    )?;
    let total = 2.5;
    let query = hsrecon_core::make_query(mu.clone());
    let line = CroftonSampler::new(1, 1, seed)?;
    let mut worst = 0.0f64;
    for y in [-3.0, -1.3, -0.2, 0.4, 1.0, 2.25, 3.7] {
        let y = Vector::new(vec![y]);
        let a = potential_from_halfspaces(&query, total, &y, &line)?.value;
        worst = worst.max((a - potential_direct(&mu, &y)?).abs());
    }
    rows.push(CheckRow::absolute("potential_line", worst, 0.0, 1e-8));
    Ok(rows)
}

pub fn verify(a: &VerifyArgs) -> CliResult<()> {
    let rows = verification_rows(a.samples, a.seed)?;
    let mut s = String::from("check,value,expected,residual,tolerance,pass\n");
    for r in &rows {
        let _ = writeln!(s, "{},{:?},{:?},{:?},{:?},{}", r.name, r.value, r.expected, r.residual, r.tolerance, r.pass);
    }
    print!("{s}");
    if let Some(out) = &a.out {
        fs::write(out, &s)?;
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

pub fn constants(a: &ConstantsArgs) -> CliResult<()> {
    println!("name,arg,value");
    for n in 1..=a.dim {
        let alpha = if n == 1 { hsrecon_core::crofton::ALPHA_ONE_DIM } else { alpha_n(n)? };
        println!("alpha,{n},{alpha:?}");
    }
    for k in 0..a.dim as i64 {
        println!("sphere_area,{k},{:?}", sphere_area(k)?);
    }
    for m in 1..=(a.dim as u32).div_ceil(2) {
        println!("c,{m},{:?}", c_const(m)?);
    }
    Ok(())
}
