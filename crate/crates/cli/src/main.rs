use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use densepoly::linkstates::{dimension, RhoParity, SeamLayout};
use densepoly::qseries::{
    character_series, decomposition_holds, finitized_characters, irreducible_labels, q_catalan, q_catalan_enumerated,
    selection_prefactor24, selection_sum, CatalanKind,
};
use densepoly::scaling::{admissible_sizes, fit_conformal_named, FitSector, FIT_PROBE};
use densepoly::spectra::{classify, eigen_sources, generating_polynomial, hamiltonian_check, MatchTolerance};
use densepoly::tangle::{verify_boundary_proposition, verify_projector_properties};
use densepoly::transfer::{functional_checks, hamiltonian_commutator, Sector, XI_DEFAULT};
use densepoly::Error;

#[derive(Parser)]
#[command(name = "densepoly", version, about = "Critical dense polymers on the strip")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Tolerance override for the subcommand's checks.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Write the artifact to this file; a text summary goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads.
    #[arg(long, global = true, env = "DENSEPOLY_JOBS")]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Parity {
    Even,
    Odd,
}

impl From<Parity> for RhoParity {
    fn from(p: Parity) -> Self {
        match p {
            Parity::Even => RhoParity::Even,
            Parity::Odd => RhoParity::Odd,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Plain,
    Prime,
}

#[derive(Args, Clone)]
struct SectorArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "Nmin")]
    n_min: Option<usize>,
    #[arg(long = "Nmax")]
    n_max: Option<usize>,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 1)]
    s: usize,
    #[arg(long, value_enum, default_value = "even")]
    rho_parity: Parity,
}

#[derive(Subcommand)]
enum Command {
    /// Number of admissible link states.
    Dims(SectorArgs),
    /// Inversion identity, crossing, commutation and initial condition.
    Verify {
        #[command(flatten)]
        sector: SectorArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.7, 1.1])]
        u: Vec<f64>,
        #[arg(long, default_value_t = XI_DEFAULT)]
        xi: f64,
        /// Dump d(u) at the first u as column-major float64.
        #[arg(long)]
        matrix_out: Option<PathBuf>,
    },
    /// Classified spectrum of d(u).
    Spectrum {
        #[command(flatten)]
        sector: SectorArgs,
        #[arg(long, default_value_t = XI_DEFAULT)]
        xi: f64,
    },
    /// Spectrum generating polynomial against the selection rules and characters.
    Selection(SectorArgs),
    /// q-Catalan polynomial.
    Qcat {
        #[arg(long = "M")]
        m: i64,
        #[arg(long, allow_hyphen_values = true)]
        r: i64,
        #[arg(long, value_enum, default_value = "plain")]
        kind: Kind,
    },
    /// Truncated Kac character and its irreducible decomposition.
    Characters {
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long, default_value_t = 10)]
        order: usize,
    },
    /// Finite-size fit of the central charge and conformal weight.
    Fit {
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long, value_enum, default_value = "even")]
        rho_parity: Parity,
        #[arg(long = "Nmin", default_value_t = 8)]
        n_min: usize,
        #[arg(long = "Nmax", default_value_t = 64)]
        n_max: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [FIT_PROBE])]
        u: Vec<f64>,
        /// Eigenvalue source: pattern or dense.
        #[arg(long, default_value = "pattern")]
        source: String,
    },
    /// Hamiltonian commutation and spectrum against pattern energies.
    Hamiltonian {
        #[command(flatten)]
        sector: SectorArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.37])]
        u: Vec<f64>,
        #[arg(long, default_value_t = XI_DEFAULT)]
        xi: f64,
    },
    /// Boundary operator proposition and projector identities.
    Boundary {
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, value_enum, default_value = "even")]
        rho_parity: Parity,
        #[arg(long, default_value_t = FRAC_PI_2)]
        lambda: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.55])]
        u: Vec<f64>,
        #[arg(long, default_value_t = XI_DEFAULT)]
        xi: f64,
    },
}

enum Failure {
    Config(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Lib(Error::Domain(_) | Error::Parity(_) | Error::UnknownStrategy { .. }) => 2,
            Failure::Lib(_) => 1,
        }
    }

    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            Failure::Config(m) => ("config", m.clone()),
            Failure::Lib(e) => (error_kind(e), e.to_string()),
        };
        json!({ "error": { "kind": kind, "message": message } })
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Parity(_) => "parity",
        Error::Consistency(_) => "consistency",
        Error::Numeric(_) => "numeric",
        Error::SingularNormalization(_) => "singular-normalization",
        Error::Classification(_) => "classification",
        Error::Ambiguous(_) => "ambiguous",
        Error::InexactDivision(_) => "inexact-division",
        Error::Fit(_) => "fit",
        Error::UnknownStrategy { .. } => "unknown-strategy",
    }
}

type Run<T> = Result<T, Failure>;

/// Rendered results of one subcommand.
struct Report {
    pass: bool,
    text: String,
    json: Value,
    csv: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(pass) => ExitCode::from(if pass { 0 } else { 1 }),
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Run<bool> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            return Err(Failure::Config(format!("--tol must be positive, got {t}")));
        }
    }
    let report = dispatch(cli)?;
    emit(cli, &report)?;
    Ok(report.pass)
}

fn emit(cli: &Cli, report: &Report) -> Run<()> {
    let render = |format: Format| -> Run<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&report.json).expect("json") + "\n"),
            Format::Csv => report
                .csv
                .clone()
                .ok_or_else(|| Failure::Config("csv output is not available for this subcommand".into())),
        }
    };
    match &cli.out {
        Some(path) => {
            let body = render(cli.format.unwrap_or(Format::Json))?;
            std::fs::write(path, body).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
            print!("{}", report.text);
        }
        None => match cli.format {
            Some(f) => print!("{}", render(f)?),
            None => print!("{}", report.text),
        },
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Run<Report> {
    match &cli.command {
        Command::Dims(sector) => dims(sector),
        Command::Verify {
            sector,
            u,
            xi,
            matrix_out,
        } => verify(sector, u, *xi, matrix_out.as_ref(), cli.tol.unwrap_or(1e-9)),
        Command::Spectrum { sector, xi } => spectrum(sector, *xi, cli.tol.unwrap_or(1e-8)),
        Command::Selection(sector) => selection(sector, cli.tol.unwrap_or(1e-8)),
        Command::Qcat { m, r, kind } => qcat(*m, *r, *kind),
        Command::Characters { r, s, order } => characters(*r, *s, *order),
        Command::Fit {
            r,
            s,
            rho_parity,
            n_min,
            n_max,
            u,
            source,
        } => {
            let sector = FitSector {
                r: *r,
                s: *s,
                rho_parity: (*rho_parity).into(),
            };
            fit(sector, *n_min, *n_max, u, source, cli.tol.unwrap_or(0.05), cli.format)
        }
        Command::Hamiltonian { sector, u, xi } => hamiltonian(sector, u, *xi, cli.tol.unwrap_or(1e-9)),
        Command::Boundary {
            r,
            rho_parity,
            lambda,
            u,
            xi,
        } => boundary(
            RhoParity::from(*rho_parity).rho(*r),
            *lambda,
            u,
            *xi,
            cli.tol.unwrap_or(1e-10),
        ),
    }
}

/// Layouts selected by `--N` or `--Nmin/--Nmax`, sorted by `N`.
fn layouts(args: &SectorArgs) -> Run<Vec<SeamLayout>> {
    let parity = RhoParity::from(args.rho_parity);
    if let Some(n) = args.n {
        if args.n_min.is_some() || args.n_max.is_some() {
            return Err(Failure::Config("--N conflicts with --Nmin/--Nmax".into()));
        }
        return Ok(vec![SeamLayout::from_kac(n, args.r, args.s, parity)?]);
    }
    let (Some(lo), Some(hi)) = (args.n_min, args.n_max) else {
        return Err(Failure::Config("give --N or both --Nmin and --Nmax".into()));
    };
    let out: Vec<SeamLayout> = (lo..=hi)
        .filter_map(|n| SeamLayout::from_kac(n, args.r, args.s, parity).ok())
        .collect();
    if out.is_empty() {
        return Err(Failure::Config(format!("no parity-consistent N in [{lo}, {hi}]")));
    }
    Ok(out)
}

fn sector_json(l: SeamLayout) -> Value {
    json!({ "N": l.n_bulk, "r": l.r(), "s": l.s, "rho": l.rho, "rho_parity": l.rho_parity().to_string() })
}

fn csv_string<R: serde::Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("csv header");
    for row in rows {
        w.serialize(row).expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
}

fn per_layout<T: Send>(ls: &[SeamLayout], f: impl Fn(SeamLayout) -> Run<T> + Sync) -> Run<Vec<T>> {
    ls.par_iter().map(|&l| f(l)).collect()
}

fn dims(args: &SectorArgs) -> Run<Report> {
    let ls = layouts(args)?;
    let rows: Vec<(SeamLayout, u64)> = ls.iter().map(|&l| (l, dimension(l))).collect();
    let text = if rows.len() == 1 {
        format!("{}\n", rows[0].1)
    } else {
        rows.iter().map(|(l, d)| format!("{l}: {d}\n")).collect()
    };
    Ok(Report {
        pass: true,
        text,
        json: Value::Array(
            rows.iter()
                .map(|(l, d)| json!({ "sector": sector_json(*l), "dim": d }))
                .collect(),
        ),
        csv: Some(csv_string(
            &["N", "r", "s", "rho", "dim"],
            rows.iter().map(|(l, d)| (l.n_bulk, l.r(), l.s, l.rho, d)),
        )),
    })
}

fn verify(args: &SectorArgs, us: &[f64], xi: f64, matrix_out: Option<&PathBuf>, tol: f64) -> Run<Report> {
    let ls = layouts(args)?;
    if us.is_empty() {
        return Err(Failure::Config("--u needs at least one value".into()));
    }
    let reports = per_layout(&ls, |l| Ok(functional_checks(&Sector::with_xi(l, xi)?, us)?))?;
    if let Some(path) = matrix_out {
        let d = Sector::with_xi(ls[0], xi)?.small_d(us[0])?;
        std::fs::write(path, d.to_column_major_bytes())
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut pass = true;
    let mut text = String::new();
    let mut items = Vec::new();
    let mut rows = Vec::new();
    for (l, r) in ls.iter().zip(&reports) {
        let worst = r.inversion.max(r.crossing).max(r.commute);
        let ok = worst <= tol && r.init <= 1e-3;
        pass &= ok;
        text += &format!(
            "{l}: inversion {:.3e} crossing {:.3e} commute {:.3e} init {:.3e} {}\n",
            r.inversion,
            r.crossing,
            r.commute,
            r.init,
            if ok { "ok" } else { "FAIL" }
        );
        items.push(json!({
            "sector": sector_json(*l),
            "checks": { "inversion": r.inversion, "crossing": r.crossing, "commute": r.commute, "init": r.init },
            "pass": ok,
        }));
        rows.push((l.n_bulk, l.r(), l.s, l.rho, r.inversion, r.crossing, r.commute, r.init));
    }
    Ok(Report {
        pass,
        text,
        json: json!({ "u": us, "xi": xi, "tol": tol, "init_tol": 1e-3, "results": items }),
        csv: Some(csv_string(
            &["N", "r", "s", "rho", "inversion", "crossing", "commute", "init"],
            rows,
        )),
    })
}

fn tolerance(tol: f64) -> MatchTolerance {
    MatchTolerance { gate: tol, tol }
}

fn spectrum(args: &SectorArgs, xi: f64, tol: f64) -> Run<Report> {
    let ls = layouts(args)?;
    let all = per_layout(&ls, |l| Ok(classify(&Sector::with_xi(l, xi)?, tolerance(tol))?))?;
    let mut text = String::new();
    let mut items = Vec::new();
    let mut rows = Vec::new();
    for (l, recs) in ls.iter().zip(all) {
        let mut recs: Vec<_> = recs.into_iter().filter(|r| r.multiplicity > 0).collect();
        recs.sort_by(|a, b| a.energy.cmp(&b.energy).then_with(|| a.pattern.cmp(&b.pattern)));
        text += &format!("{l}\n");
        for r in &recs {
            text += &format!("  E={} x{} {}\n", r.energy, r.multiplicity, r.pattern);
            let minus: Vec<String> = r.pattern.minus().iter().map(|m| m.to_string()).collect();
            rows.push((
                l.n_bulk,
                l.r(),
                l.s,
                l.rho,
                minus.join(" "),
                r.pattern.edge(),
                r.energy.to_string(),
                r.multiplicity,
            ));
        }
        items.push(json!({ "sector": sector_json(*l), "records": recs }));
    }
    let json = if items.len() == 1 {
        items[0]["records"].clone()
    } else {
        Value::Array(items)
    };
    Ok(Report {
        pass: true,
        text,
        json,
        csv: Some(csv_string(
            &["N", "r", "s", "rho", "minus", "edge", "energy", "multiplicity"],
            rows,
        )),
    })
}

fn selection(args: &SectorArgs, tol: f64) -> Run<Report> {
    let ls = layouts(args)?;
    let results = per_layout(&ls, |l| {
        let recs = classify(&Sector::new(l)?, tolerance(tol))?;
        let g = generating_polynomial(&recs);
        let sum = selection_sum(l.n_bulk, l.rho, l.s)?;
        let chi = finitized_characters(l.n_bulk, l.r(), l.s, l.rho_parity())?;
        let mult: usize = recs.iter().map(|r| r.multiplicity).sum();
        Ok((g, sum, chi, mult))
    })?;
    let mut pass = true;
    let mut text = String::new();
    let mut items = Vec::new();
    for (l, (g, sum, chi, mult)) in ls.iter().zip(results) {
        let aligned = g.shift24(selection_prefactor24(l.s));
        let dim = dimension(*l);
        let ok = g == sum && aligned == chi && mult as u64 == dim;
        pass &= ok;
        if ls.len() == 1 {
            text += &format!("{g}\n");
        } else {
            text += &format!("{l}: {g}\n");
        }
        if !ok {
            text += &format!("  mismatch: selection {sum}, character {chi}, multiplicities {mult} of {dim}\n");
        }
        items.push(json!({
            "sector": sector_json(*l),
            "generating": g.to_string(),
            "selection_sum": sum.to_string(),
            "character": chi.to_string(),
            "aligned": aligned.to_string(),
            "multiplicities": mult,
            "dim": dim,
            "equal": ok,
        }));
    }
    Ok(Report {
        pass,
        text,
        json: json!({ "tol": tol, "results": items }),
        csv: None,
    })
}

fn qcat(m: i64, r: i64, kind: Kind) -> Run<Report> {
    if m < 0 {
        return Err(Failure::Config(format!("--M must be non-negative, got {m}")));
    }
    let kind = match kind {
        Kind::Plain => CatalanKind::Plain,
        Kind::Prime => CatalanKind::Prime,
    };
    let poly = q_catalan(m, r, kind)?;
    // Brute force stays cheap up to height 8.
    let enumerated = (m <= 8).then(|| q_catalan_enumerated(m as u32, r, kind));
    let pass = enumerated.as_ref().is_none_or(|e| *e == poly);
    Ok(Report {
        pass,
        text: format!("{poly}\n"),
        json: json!({
            "M": m,
            "r": r,
            "kind": kind,
            "polynomial": poly.to_string(),
            "terms": poly,
            "enumeration_agrees": enumerated.map(|e| e == poly),
        }),
        csv: None,
    })
}

fn characters(r: usize, s: usize, order: usize) -> Run<Report> {
    let series = character_series(r, s, order)?;
    let holds = decomposition_holds(r, s, order)?;
    Ok(Report {
        pass: holds,
        text: format!("{series}\ndecomposition {}\n", if holds { "ok" } else { "FAIL" }),
        json: json!({
            "r": r,
            "s": s,
            "order": order,
            "series": series.to_string(),
            "irreducible": irreducible_labels(r, s),
            "decomposition": holds,
        }),
        csv: None,
    })
}

fn fit(
    sector: FitSector,
    n_min: usize,
    n_max: usize,
    us: &[f64],
    source: &str,
    tol: f64,
    format: Option<Format>,
) -> Run<Report> {
    if format == Some(Format::Csv) && us.len() != 1 {
        return Err(Failure::Config("csv output takes a single --u".into()));
    }
    let sizes = admissible_sizes(sector, n_min, n_max);
    let sources = eigen_sources();
    let mut pass = true;
    let mut text = String::new();
    let mut fits = Vec::new();
    let mut csv = None;
    for &u in us {
        let f = fit_conformal_named(sector, &sizes, u, &sources, source)?;
        let delta = *f.delta_exact.numer() as f64 / *f.delta_exact.denom() as f64;
        let ok = (f.delta_est - delta).abs() <= tol;
        pass &= ok;
        let summary = json!({ "u": u, "c_est": f.c_est, "delta_est": f.delta_est, "residual": f.residual, "pass": ok });
        text += &format!("{summary}\n");
        csv = Some(csv_string(&["N", "E", "E_minus_bulk_bdy", "predicted"], f.csv_rows()));
        fits.push(json!({ "summary": summary, "fit": f }));
    }
    Ok(Report {
        pass,
        text,
        json: json!({ "tol": tol, "fits": fits }),
        csv,
    })
}

fn hamiltonian(args: &SectorArgs, us: &[f64], xi: f64, tol: f64) -> Run<Report> {
    let ls = layouts(args)?;
    let results = per_layout(&ls, |l| {
        let sector = Sector::with_xi(l, xi)?;
        let mut comm = 0.0f64;
        for &u in us {
            comm = comm.max(hamiltonian_commutator(&sector, u)?);
        }
        let recs = classify(&sector, MatchTolerance::default())?;
        let rep = hamiltonian_check(&sector, &recs, MatchTolerance { gate: tol, tol })?;
        Ok((comm, rep))
    })?;
    let mut pass = true;
    let mut text = String::new();
    let mut items = Vec::new();
    for (l, (comm, rep)) in ls.iter().zip(results) {
        let ok = comm <= tol && rep.deviation <= tol;
        pass &= ok;
        text += &format!(
            "{l}: commutator {comm:.3e} deviation {:.3e} clusters {} {}\n",
            rep.deviation,
            rep.clusters,
            if ok { "ok" } else { "FAIL" }
        );
        items.push(json!({ "sector": sector_json(*l), "commutator": comm, "spectrum": rep, "pass": ok }));
    }
    Ok(Report {
        pass,
        text,
        json: json!({ "u": us, "xi": xi, "tol": tol, "results": items }),
        csv: None,
    })
}

fn boundary(rho: usize, lambda: f64, us: &[f64], xi: f64, tol: f64) -> Run<Report> {
    if !(lambda > 0.0 && lambda < PI) {
        return Err(Failure::Config(format!("--lambda must lie in (0, pi), got {lambda}")));
    }
    let proposition = us
        .par_iter()
        .map(|&u| verify_boundary_proposition(rho, u, xi, lambda))
        .collect::<Result<Vec<f64>, Error>>()?;
    let projectors = if rho >= 2 {
        (2..=5)
            .map(|rp| verify_projector_properties(rho, rp, lambda))
            .collect::<Result<Vec<f64>, Error>>()?
    } else {
        Vec::new()
    };
    let worst_prop = proposition.iter().copied().fold(0.0, f64::max);
    let worst_proj = projectors.iter().copied().fold(0.0, f64::max);
    let pass = worst_prop <= tol && worst_proj <= tol;
    Ok(Report {
        pass,
        text: format!(
            "rho={rho} lambda={lambda}: proposition {worst_prop:.3e} projectors {worst_proj:.3e} {}\n",
            if pass { "ok" } else { "FAIL" }
        ),
        json: json!({
            "rho": rho,
            "lambda": lambda,
            "xi": xi,
            "u": us,
            "tol": tol,
            "proposition": proposition,
            "projectors": projectors,
            "pass": pass,
        }),
        csv: None,
    })
}
