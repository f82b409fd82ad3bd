use std::path::{Path, PathBuf};
use std::time::Instant;

use riskdiff::{
    critical_region_with, maximal_size_of, p_asy, p_cz_with, p_exact_with, p_l_with, p_wald, Method, ObservedTable,
    TrialDesign,
};
use serde_json::{json, Value};

use crate::commands::{
    alpha, delta_axis, ec_row, interval, interval_cells, key, margin, power_report, rounded, with, DOUBLING,
    EC_COLUMNS, INTERVAL_COLUMNS,
};
use crate::output::{to_json, write_atomic, Cell, Format, Report};
use crate::{Failure, Grids, Outcome, ReproduceArgs};

struct Case {
    name: &'static str,
    x_t: u32,
    n_t: u32,
    x_c: u32,
    n_c: u32,
    delta0: f64,
    alpha: f64,
}

impl Case {
    fn table(&self) -> (ObservedTable, TrialDesign) {
        (ObservedTable::new(self.x_t, self.x_c), TrialDesign::new(self.n_t, self.n_c).expect("positive arms"))
    }
}

const EXAMPLES: [Case; 3] = [
    Case { name: "Example 1", x_t: 5, n_t: 8, x_c: 10, n_c: 19, delta0: 0.10, alpha: 0.5 },
    Case { name: "Example 2", x_t: 5, n_t: 6, x_c: 2, n_c: 6, delta0: 0.12, alpha: 0.05 },
    Case { name: "Example 3", x_t: 7, n_t: 18, x_c: 5, n_c: 25, delta0: 0.10, alpha: 0.05 },
];

/// Example 1 with nine treatment subjects, the variant used for the p_L profile.
const EXAMPLE_1_NINE: Case = Case { name: "Example 1 (n_t = 9)", x_t: 5, n_t: 9, x_c: 10, n_c: 19, delta0: 0.10, alpha: 0.5 };

const STUDIES: [Case; 3] = [
    Case { name: "Rodary", x_t: 83, n_t: 88, x_c: 69, n_c: 76, delta0: 0.10, alpha: 0.05 },
    Case { name: "Fries", x_t: 8, n_t: 15, x_c: 3, n_c: 15, delta0: 0.0, alpha: 0.05 },
    Case { name: "Kim", x_t: 173, n_t: 181, x_c: 174, n_c: 181, delta0: 0.05, alpha: 0.05 },
];

const METHODS: [Method; 4] = [Method::Ec, Method::Cz, Method::Mn, Method::Wald];

struct Item {
    file: &'static str,
    description: &'static str,
    build: fn(&Grids, &ReproduceArgs, Value) -> Result<Report, Failure>,
}

const ITEMS: [Item; 6] = [
    Item {
        file: "examples_table.csv",
        description: "p-values and maximal sizes of the four methods on the three examples",
        build: examples_table,
    },
    Item {
        file: "intervals.csv",
        description: "confidence intervals of the four methods on the six examples",
        build: intervals,
    },
    Item {
        file: "power_pt095_n5_11.csv",
        description: "power curves at P_T = 0.95, n = (5, 11), delta0 = 0.03, alpha = 0.7",
        build: power_first,
    },
    Item {
        file: "power_pt010_n12_5.csv",
        description: "power curves at P_T = 0.1, n = (12, 5), delta0 = 0.33, alpha = 0.1",
        build: power_second,
    },
    Item {
        file: "pl_profile.csv",
        description: "P_L against delta with its running maximum for 5/8 vs 10/19 and 5/9 vs 10/19",
        build: pl_profile,
    },
    Item {
        file: "ec_expectation.csv",
        description: "Monte Carlo mean of the exact correction term over P_T, P_C, delta0 and N",
        build: ec_grid,
    },
];

fn examples_table(grids: &Grids, _: &ReproduceArgs, config: Value) -> Result<Report, Failure> {
    let mut columns = vec!["example", "xt", "nt", "xc", "nc", "delta0", "half_alpha"];
    columns.extend(["p_ec", "p_cz", "p_mn", "p_wald", "size_ec", "size_cz", "size_mn", "size_wald"]);
    let mut report = Report::new(config, &columns);
    for case in EXAMPLES.iter().chain([&EXAMPLE_1_NINE]) {
        let (t, d) = case.table();
        let m = margin(case.delta0)?;
        let mut row: Vec<Cell> = vec![
            case.name.into(),
            t.x_t.into(),
            d.n_t.into(),
            t.x_c.into(),
            d.n_c.into(),
            case.delta0.into(),
            (case.alpha / 2.0).into(),
        ];
        row.push(p_exact_with(t, d, m, &grids.search)?.value.into());
        row.push(p_cz_with(t, d, m, &grids.search)?.value.into());
        row.push(p_asy(t, d, m)?.into());
        row.push(p_wald(t, d, m)?.into());
        for method in METHODS {
            let region = critical_region_with(d, m, case.alpha, method, &grids.search)?;
            row.push(maximal_size_of(&region, &grids.size)?.value.into());
        }
        report.push(row);
    }
    Ok(report)
}

fn intervals(grids: &Grids, _: &ReproduceArgs, config: Value) -> Result<Report, Failure> {
    let mut columns = vec!["example", "xt", "nt", "xc", "nc", "delta0", "alpha", "method"];
    columns.extend(INTERVAL_COLUMNS);
    let mut report = Report::new(config, &columns);
    for case in EXAMPLES.iter().chain(&STUDIES) {
        let (t, d) = case.table();
        let m = margin(case.delta0)?;
        let level = alpha(case.alpha)?;
        for method in METHODS {
            let start = Instant::now();
            let iv = interval(method, t, d, m, level, grids)?;
            let mut row: Vec<Cell> = vec![
                case.name.into(),
                t.x_t.into(),
                d.n_t.into(),
                t.x_c.into(),
                d.n_c.into(),
                case.delta0.into(),
                level.into(),
                key(method).into(),
            ];
            row.extend(interval_cells(&iv, start.elapsed().as_secs_f64()));
            report.push(row);
        }
    }
    Ok(report)
}

fn power_case(grids: &Grids, config: Value, n_t: u32, n_c: u32, delta0: f64, level: f64, p_t: f64) -> Result<Report, Failure> {
    let d = TrialDesign::new(n_t, n_c).expect("positive arms");
    let config = with(config, json!({"nt": n_t, "nc": n_c, "delta0": delta0, "alpha": level, "pt": p_t}));
    power_report(d, margin(delta0)?, level, p_t, &METHODS, grids, config)
}

fn power_first(grids: &Grids, _: &ReproduceArgs, config: Value) -> Result<Report, Failure> {
    power_case(grids, config, 5, 11, 0.03, 0.7, 0.95)
}

fn power_second(grids: &Grids, _: &ReproduceArgs, config: Value) -> Result<Report, Failure> {
    power_case(grids, config, 12, 5, 0.33, 0.1, 0.1)
}

fn pl_profile(grids: &Grids, _: &ReproduceArgs, config: Value) -> Result<Report, Failure> {
    let mut report = Report::new(config, &["xt", "nt", "xc", "nc", "delta", "p_l", "argmax_p_t", "running_max"]);
    for n_t in [8, 9] {
        let d = TrialDesign::new(n_t, 19).expect("positive arms");
        let t = ObservedTable::new(5, 10);
        let mut running = f64::NEG_INFINITY;
        for delta in delta_axis(grids.search.delta_step) {
            let r = p_l_with(t, d, delta, &grids.search)?;
            running = running.max(r.value);
            report.push(vec![
                t.x_t.into(),
                n_t.into(),
                t.x_c.into(),
                d.n_c.into(),
                delta.into(),
                r.value.into(),
                r.argmax_p_t.into(),
                running.into(),
            ]);
        }
    }
    Ok(report)
}

fn ec_grid(grids: &Grids, args: &ReproduceArgs, config: Value) -> Result<Report, Failure> {
    let mut report = Report::new(config, &EC_COLUMNS);
    for delta0 in [0.0, 0.1, 0.2] {
        for p_t in [0.3, 0.5, 0.7] {
            for p_c in [0.3, 0.5, 0.7] {
                for n in DOUBLING {
                    let d = TrialDesign::new(n, n).expect("positive arms");
                    report.push(ec_row(d, p_t, p_c, delta0, args.seed, args.nsims, grids)?);
                }
            }
        }
    }
    Ok(report)
}

fn print_summary(report: &Report) {
    println!("{:<22} {:>6} {:>6} {:>6} {:>6}   {:>6} {:>6} {:>6} {:>6}", "", "EC", "CZ", "MN", "Wald", "EC", "CZ", "MN", "Wald");
    for row in &report.rows {
        let name = match &row[0] {
            Cell::Text(s) => s.as_str(),
            _ => "",
        };
        let nums: Vec<String> = row[7..]
            .iter()
            .map(|c| match c {
                Cell::Num(v) => rounded(*v),
                _ => "-".into(),
            })
            .collect();
        println!(
            "{name:<22} {:>6} {:>6} {:>6} {:>6}   {:>6} {:>6} {:>6} {:>6}",
            nums[0], nums[1], nums[2], nums[3], nums[4], nums[5], nums[6], nums[7]
        );
    }
}

pub fn run(args: &ReproduceArgs, grids: &Grids, base: Value, out: Option<&Path>) -> Outcome {
    if args.nsims == 0 {
        return Err(Failure::Usage("--nsims must be at least 1".into()));
    }
    let dir: PathBuf = out.map_or_else(|| PathBuf::from("reproduce"), Path::to_path_buf);
    std::fs::create_dir_all(&dir)?;
    let config = with(base, json!({"subcommand": "reproduce", "nsims": args.nsims, "seed": args.seed}));

    let mut files = Vec::new();
    let mut failed = Vec::new();
    for item in &ITEMS {
        let start = Instant::now();
        let item_config = with(config.clone(), json!({"item": item.file}));
        match (item.build)(grids, args, item_config) {
            Ok(report) => {
                write_atomic(&dir.join(item.file), &report.render(Format::Csv))?;
                if item.file == "examples_table.csv" {
                    print_summary(&report);
                }
                files.push(json!({
                    "file": item.file,
                    "description": item.description,
                    "rows": report.rows.len(),
                    "seconds": start.elapsed().as_secs_f64(),
                }));
            }
            Err(Failure::Usage(msg)) | Err(Failure::Compute(msg)) => {
                eprintln!("riskdiff: {} failed: {msg}", item.file);
                failed.push(json!({"file": item.file, "error": msg}));
            }
        }
    }
    let manifest = json!({"config": config, "files": files, "failed": failed});
    let mut bytes = to_json(&manifest);
    bytes.push(b'\n');
    write_atomic(&dir.join("manifest.json"), &bytes)?;
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<String> = failed.iter().map(|f| f["file"].as_str().unwrap_or("?").to_string()).collect();
        Err(Failure::Compute(format!("failed items: {}", names.join(", "))))
    }
}
