use std::path::Path;
use std::time::Instant;

use riskdiff::{
    ci_cz_with, ci_ec_with, ci_mn_with, ci_wald, critical_region_with, ec_expectation_with, fisher_exact,
    fisher_exact_greater, maximal_size_of, p_asy, p_cz_with, p_exact_with, p_wald, power_curve_of, size_profile,
    Interval, Margin, Method, ObservedTable, TrialDesign,
};
use serde_json::{json, Map, Value};

use crate::output::{emit, to_json, write_atomic, Cell, Format, Report};
use crate::{
    parse_methods, CiArgs, DesignArgs, EcExpectationArgs, Failure, Grids, MaxsizeArgs, Outcome, PowerArgs,
    PvalueArgs, TableArgs,
};

/// Merge the fields of `extra` into the object `base`.
pub fn with(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        for (k, v) in e {
            b.insert(k, v);
        }
    }
    base
}

fn usage<T>(e: riskdiff::Error) -> Result<T, Failure> {
    Err(Failure::Usage(e.to_string()))
}

fn table(a: &TableArgs) -> Result<(ObservedTable, TrialDesign), Failure> {
    let d = TrialDesign::new(a.nt, a.nc).or_else(usage)?;
    let t = ObservedTable::new(a.xt, a.xc);
    d.check(t).or_else(usage)?;
    Ok((t, d))
}

fn design(a: &DesignArgs) -> Result<TrialDesign, Failure> {
    TrialDesign::new(a.nt, a.nc).or_else(usage)
}

pub fn margin(delta0: f64) -> Result<Margin, Failure> {
    Margin::new(delta0).or_else(usage)
}

pub fn alpha(alpha: f64) -> Result<f64, Failure> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(Failure::Usage(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

pub fn probability(name: &str, p: f64) -> Result<f64, Failure> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Failure::Usage(format!("--{name} must lie in [0, 1], got {p}")))
    }
}

pub fn key(m: Method) -> String {
    m.name().to_ascii_lowercase()
}

/// Three-decimal rendering used in human-readable summaries.
pub fn rounded(p: f64) -> String {
    format!("{p:.3}")
}

/// Emit a report; with CSV output to a file, the summary also goes to a
/// sibling `.summary.json`.
fn finish(report: &Report, format: Format, out: Option<&Path>) -> Outcome {
    emit(out, &report.render(format))?;
    if let (Format::Csv, Some(path), Some(summary)) = (format, out, &report.summary) {
        let mut bytes = to_json(&json!({ "config": report.config, "summary": summary }));
        bytes.push(b'\n');
        write_atomic(&path.with_extension("summary.json"), &bytes)?;
    }
    Ok(())
}

pub fn pvalue(a: &PvalueArgs, grids: &Grids, base: Value, format: Format, out: Option<&Path>) -> Outcome {
    let (t, d) = table(&a.table)?;
    let m = margin(a.delta0)?;
    let config = with(
        base,
        json!({"subcommand": "pvalue", "xt": t.x_t, "nt": d.n_t, "xc": t.x_c, "nc": d.n_c, "delta0": a.delta0}),
    );
    let exact = p_exact_with(t, d, m, &grids.search)?;
    let cz = p_cz_with(t, d, m, &grids.search)?;
    let asy = p_asy(t, d, m)?;
    let wald = p_wald(t, d, m)?;

    let mut report = Report::new(config, &["statistic", "p_value", "argmax_p_t", "argmax_delta"]);
    report.push(vec!["exact".into(), exact.value.into(), exact.argmax_p_t.into(), m.boundary().into()]);
    report.push(vec!["cz".into(), cz.value.into(), Cell::Missing, cz.argmax_delta.into()]);
    report.push(vec!["asy".into(), asy.into(), Cell::Missing, Cell::Missing]);
    report.push(vec!["wald".into(), wald.into(), Cell::Missing, Cell::Missing]);
    let mut summary = json!({"p_exact": exact.value, "p_cz": cz.value, "p_asy": asy, "p_wald": wald});
    let mut shown = json!({"exact": rounded(exact.value), "cz": rounded(cz.value), "mn": rounded(asy), "wald": rounded(wald)});
    if a.delta0 == 0.0 {
        let two = fisher_exact(t, d)?;
        let one = fisher_exact_greater(t, d)?;
        report.push(vec!["fisher".into(), two.into(), Cell::Missing, Cell::Missing]);
        report.push(vec!["fisher_greater".into(), one.into(), Cell::Missing, Cell::Missing]);
        summary["fisher"] = json!(two);
        summary["fisher_greater"] = json!(one);
        shown["fisher"] = json!(rounded(two));
    }
    summary["rounded"] = shown;
    report.summary = Some(summary);
    finish(&report, format, out)
}

pub fn interval(
    method: Method,
    t: ObservedTable,
    d: TrialDesign,
    m: Margin,
    alpha: f64,
    grids: &Grids,
) -> riskdiff::Result<Interval> {
    match method {
        Method::Ec => ci_ec_with(t, d, m, alpha, &grids.search),
        Method::Cz => ci_cz_with(t, d, alpha, Some(m), &grids.search),
        Method::Mn => ci_mn_with(t, d, alpha, Some(m)),
        Method::Wald => ci_wald(t, d, alpha),
    }
}

pub const INTERVAL_COLUMNS: [&str; 7] = ["lower", "upper", "level", "monotone_ok", "degenerate", "consistent", "seconds"];

pub fn interval_cells(iv: &Interval, seconds: f64) -> Vec<Cell> {
    vec![
        iv.lower.into(),
        iv.upper.into(),
        iv.level.into(),
        iv.monotone_ok.into(),
        iv.degenerate.into(),
        iv.consistent.into(),
        seconds.into(),
    ]
}

pub fn ci(a: &CiArgs, grids: &Grids, base: Value, format: Format, out: Option<&Path>) -> Outcome {
    let (t, d) = table(&a.table)?;
    let m = margin(a.delta0)?;
    let level = alpha(a.alpha)?;
    let methods = parse_methods(&a.method)?;
    let config = with(
        base,
        json!({
            "subcommand": "ci", "xt": t.x_t, "nt": d.n_t, "xc": t.x_c, "nc": d.n_c,
            "delta0": a.delta0, "alpha": level, "methods": methods,
        }),
    );
    let mut columns = vec!["method"];
    columns.extend(INTERVAL_COLUMNS);
    let mut report = Report::new(config, &columns);
    for method in methods {
        let start = Instant::now();
        let iv = interval(method, t, d, m, level, grids)?;
        let mut row = vec![Cell::from(key(method))];
        row.extend(interval_cells(&iv, start.elapsed().as_secs_f64()));
        report.push(row);
    }
    finish(&report, format, out)
}

pub fn maxsize(a: &MaxsizeArgs, grids: &Grids, base: Value, format: Format, out: Option<&Path>) -> Outcome {
    let d = design(&a.design)?;
    let m = margin(a.delta0)?;
    let level = alpha(a.alpha)?;
    let methods = parse_methods(&a.method)?;
    let config = with(
        base,
        json!({"subcommand": "opchar maxsize", "nt": d.n_t, "nc": d.n_c, "delta0": a.delta0, "alpha": level, "methods": methods}),
    );
    let mut profiles = Vec::new();
    let mut summary = Map::new();
    for &method in &methods {
        let region = critical_region_with(d, m, level, method, &grids.search)?;
        let best = maximal_size_of(&region, &grids.size)?;
        profiles.push(size_profile(&region, &grids.size)?);
        summary.insert(
            key(method),
            json!({
                "maximal_size": best.value,
                "argmax_p_t": best.argmax_p_t,
                "argmax_delta": best.argmax_delta,
                "boundary_size": best.boundary_value,
                "n_rejected": region.count(),
                "rounded": rounded(best.value),
            }),
        );
    }
    let names: Vec<String> = methods.iter().flat_map(|&m| [format!("size_{}", key(m)), format!("argmax_p_t_{}", key(m))]).collect();
    let mut columns = vec!["delta"];
    columns.extend(names.iter().map(String::as_str));
    let mut report = Report::new(config, &columns);
    for k in 0..profiles[0].len() {
        let mut row = vec![Cell::from(profiles[0][k].delta)];
        for p in &profiles {
            row.push(p[k].value.into());
            row.push(p[k].argmax_p_t.into());
        }
        report.push(row);
    }
    report.summary = Some(Value::Object(summary));
    finish(&report, format, out)
}

/// `-1, -1 + step, ..., 1` with the last point pinned at 1.
pub fn delta_axis(step: f64) -> Vec<f64> {
    let n = (2.0 / step).round().max(1.0) as usize;
    (0..=n).map(|i| (-1.0 + 2.0 * i as f64 / n as f64).clamp(-1.0, 1.0)).collect()
}

pub fn power_report(
    d: TrialDesign,
    m: Margin,
    level: f64,
    p_t: f64,
    methods: &[Method],
    grids: &Grids,
    config: Value,
) -> Result<Report, Failure> {
    let regions = methods
        .iter()
        .map(|&method| critical_region_with(d, m, level, method, &grids.search))
        .collect::<riskdiff::Result<Vec<_>>>()?;
    let axis = delta_axis(grids.power_step);
    let curve = power_curve_of(&regions, p_t, &axis)?;
    let names: Vec<String> = methods.iter().map(|&m| format!("power_{}", key(m))).collect();
    let mut columns = vec!["delta", "admissible"];
    columns.extend(names.iter().map(String::as_str));
    let mut report = Report::new(config, &columns);
    for (k, &delta) in axis.iter().enumerate() {
        let mut row = vec![Cell::from(delta), curve.admissible[k].into()];
        row.extend(curve.curves.iter().map(|c| Cell::from(c.reject_prob[k])));
        report.push(row);
    }
    let sizes: Map<String, Value> = methods
        .iter()
        .zip(&regions)
        .map(|(&m, r)| (key(m), json!(r.count())))
        .collect();
    report.summary = Some(json!({
        "p_t": p_t,
        "n_aa": curve.n_aa,
        "n_ar": curve.n_ar,
        "n_rr": curve.n_rr,
        "n_ra": curve.n_ra,
        "n_rejected": sizes,
    }));
    Ok(report)
}

pub fn power(a: &PowerArgs, grids: &Grids, base: Value, format: Format, out: Option<&Path>) -> Outcome {
    let d = design(&a.design)?;
    let m = margin(a.delta0)?;
    let level = alpha(a.alpha)?;
    let p_t = probability("pt", a.pt)?;
    let methods = parse_methods(&a.method)?;
    let config = with(
        base,
        json!({"subcommand": "opchar power", "nt": d.n_t, "nc": d.n_c, "pt": p_t, "delta0": a.delta0, "alpha": level, "methods": methods}),
    );
    let report = power_report(d, m, level, p_t, &methods, grids, config)?;
    finish(&report, format, out)
}

pub const EC_COLUMNS: [&str; 10] =
    ["n_t", "n_c", "p_t", "p_c", "delta0", "delta", "mean", "std_error", "n_used", "n_degenerate"];

pub fn ec_row(d: TrialDesign, p_t: f64, p_c: f64, delta0: f64, seed: u64, nsims: usize, grids: &Grids) -> Result<Vec<Cell>, Failure> {
    let e = ec_expectation_with(d, p_t, p_c, margin(delta0)?, nsims, seed, &grids.search)?;
    Ok(vec![
        d.n_t.into(),
        d.n_c.into(),
        p_t.into(),
        p_c.into(),
        delta0.into(),
        e.delta.into(),
        e.mean.into(),
        e.std_error.into(),
        e.n_used.into(),
        e.n_degenerate.into(),
    ])
}

pub const DOUBLING: [u32; 7] = [10, 20, 40, 80, 160, 320, 640];

pub fn ec_expectation(a: &EcExpectationArgs, grids: &Grids, base: Value, format: Format, out: Option<&Path>) -> Outcome {
    let p_t = probability("pt", a.pt)?;
    let p_c = probability("pc", a.pc)?;
    margin(a.delta0)?;
    if a.nsims == 0 {
        return Err(Failure::Usage("--nsims must be at least 1".into()));
    }
    let designs: Vec<TrialDesign> = match (a.nt, a.nc) {
        (Some(nt), Some(nc)) => vec![TrialDesign::new(nt, nc).or_else(usage)?],
        _ => DOUBLING.iter().map(|&n| TrialDesign::new(n, n).expect("positive")).collect(),
    };
    let config = with(
        base,
        json!({
            "subcommand": "opchar ec-expectation", "pt": p_t, "pc": p_c, "delta0": a.delta0,
            "designs": designs, "nsims": a.nsims, "seed": a.seed,
        }),
    );
    let mut report = Report::new(config, &EC_COLUMNS);
    for d in designs {
        report.push(ec_row(d, p_t, p_c, a.delta0, a.seed, a.nsims, grids)?);
    }
    finish(&report, format, out)
}
