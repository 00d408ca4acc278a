use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, ValueEnum};
use lossjump::theory::{
    kernel_parts, rate_peak, xi_n_csch2, DiagonalKernel, Estimate, KernelMethod, ParamDistribution,
};

use crate::config::{resolve, OUTPUT_ROOT_VAR};
use crate::CliError;

#[derive(Clone, Copy, ValueEnum)]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Args)]
pub struct TheoryArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_w: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_b: f64,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    pub xi_min: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 100)]
    pub xi_count: usize,
    /// Exponents of the ξⁿcsch²ξ columns.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7")]
    pub n: Vec<u32>,
    #[arg(long, value_enum, default_value_t = Method::Quadrature)]
    pub method: Method,
    /// Gauss nodes per quadrature dimension.
    #[arg(long, default_value_t = 1024)]
    pub nodes: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub mc_seed: u64,
    /// Also evaluate every kernel term with the other method and write theory_compare.csv.
    #[arg(long)]
    pub compare: bool,
    #[arg(long, default_value = "theory")]
    pub out: PathBuf,
}

impl TheoryArgs {
    fn grid(&self) -> Result<Vec<f64>, CliError> {
        let ok = self.xi_min.is_finite() && self.xi_max.is_finite() && self.xi_min > 0.0 && self.xi_max > self.xi_min;
        if !ok || self.xi_count < 2 {
            return Err(CliError::Config(format!(
                "ξ grid needs 0 < xi_min < xi_max and xi_count >= 2 (got {}, {}, {})",
                self.xi_min, self.xi_max, self.xi_count
            )));
        }
        let h = (self.xi_max - self.xi_min) / (self.xi_count - 1) as f64;
        Ok((0..self.xi_count).map(|i| self.xi_min + h * i as f64).collect())
    }

    fn method(&self, which: Method) -> KernelMethod {
        match which {
            Method::Quadrature => KernelMethod::Quadrature { nodes: self.nodes },
            Method::MonteCarlo => KernelMethod::MonteCarlo {
                samples: self.samples,
                seed: self.mc_seed,
            },
        }
    }
}

fn write(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn method_label(m: KernelMethod) -> String {
    match m {
        KernelMethod::Quadrature { nodes } => format!("quadrature nodes={nodes}"),
        KernelMethod::MonteCarlo { samples, seed } => format!("monte_carlo samples={samples} seed={seed}"),
    }
}

pub fn theory(args: TheoryArgs) -> Result<ExitCode, CliError> {
    let xi = args.grid()?;
    if !args.gamma.is_finite() || args.gamma < 0.0 {
        return Err(CliError::Config(format!("gamma must be finite and >= 0, got {}", args.gamma)));
    }
    let dist = ParamDistribution {
        sigma_a: args.sigma_a,
        sigma_w: args.sigma_w,
        sigma_b: args.sigma_b,
    };
    dist.validate().map_err(CliError::from_core)?;
    let method = args.method(args.method);
    method.validate().map_err(CliError::from_core)?;

    let root = std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from);
    let out = resolve(&args.out, root.as_deref());
    std::fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;

    let k = DiagonalKernel::compute(&xi, args.gamma, &dist, method).map_err(CliError::from_core)?;
    let mut s = String::new();
    writeln!(
        s,
        "# a ~ N(0, {}^2), r = |w| with w ~ N(0, {}^2), sigma_b = {}; gamma = {}; {}; xi_n_csch2_n = xi^n / sinh(xi)^2",
        dist.sigma_a,
        dist.sigma_w,
        dist.sigma_b,
        args.gamma,
        method_label(method)
    )
    .unwrap();
    s.push_str("xi,kernel_delta,kernel_solution");
    for n in &args.n {
        write!(s, ",xi_n_csch2_{n}").unwrap();
    }
    s.push('\n');
    for (i, x) in xi.iter().enumerate() {
        write!(s, "{x},{},{}", k.delta[i], k.solution[i]).unwrap();
        for &n in &args.n {
            write!(s, ",{}", xi_n_csch2(n, *x)).unwrap();
        }
        s.push('\n');
    }
    write(&out.join("theory.csv"), &s)?;

    let mut s = String::from("# interior maximizer of xi^n csch^2(xi), root of n = 2 xi coth(xi); blank when none exists\nn,xi_star\n");
    for &n in &args.n {
        match rate_peak(n) {
            Ok(p) => writeln!(s, "{n},{p}").unwrap(),
            Err(_) => writeln!(s, "{n},").unwrap(),
        }
    }
    write(&out.join("rate_peaks.csv"), &s)?;
    println!("wrote {}/theory.csv and rate_peaks.csv ({} frequencies)", out.display(), xi.len());

    if args.compare {
        compare(&args, &xi, &dist, &out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn compare(args: &TheoryArgs, xi: &[f64], dist: &ParamDistribution, out: &std::path::Path) -> Result<(), CliError> {
    let q = args.method(Method::Quadrature);
    let mc = args.method(Method::MonteCarlo);
    let mut s = String::from("# each kernel term by quadrature and Monte Carlo; z = (mc - quadrature) / std_error\nxi,term,quadrature,monte_carlo,std_error,z\n");
    let mut worst = 0.0f64;
    for &x in xi {
        let a = kernel_parts(x, dist, q).map_err(CliError::from_core)?;
        let b = kernel_parts(x, dist, mc).map_err(CliError::from_core)?;
        let terms: [(&str, &Estimate, &Estimate); 4] = [
            ("delta_residual", &a.delta_residual, &b.delta_residual),
            ("delta_gamma", &a.delta_gamma, &b.delta_gamma),
            ("solution_residual", &a.solution_residual, &b.solution_residual),
            ("solution_gamma", &a.solution_gamma, &b.solution_gamma),
        ];
        for (name, qa, mb) in terms {
            let se = mb.std_error.unwrap_or(f64::NAN);
            let z = (mb.value - qa.value) / se;
            worst = worst.max(z.abs());
            writeln!(s, "{x},{name},{},{},{se},{z}", qa.value, mb.value).unwrap();
            println!("xi {x:.4} {name:<18} quadrature {:+.6e}  monte carlo {:+.6e} ± {se:.1e}", qa.value, mb.value);
        }
    }
    write(&out.join("theory_compare.csv"), &s)?;
    println!("max |z| = {worst:.2}");
    Ok(())
}
