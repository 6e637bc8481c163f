//! Driving runs from TOML configurations without the command line.

use flexdr_harness::{compare, run, subdomain_sweep, RunConfig};

const BASE: &str = r#"
[problem]
kind = "convdiff"
nx = 40
ny = 40
peclet = 50.0
block_size = 2
seed = 7

[partition]
p = 4
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fdr = RunConfig::from_toml_str(&format!("{BASE}[solver]\nvariant = \"fgmres_dr\"\ntol_inner = 0.1\n"))?;
    let outcome = run(&fdr)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary())?);

    let lusgs = RunConfig::from_toml_str(&format!(
        "{BASE}[preconditioner]\nleaf = \"lusgs\"\nsweeps = 4\n[solver]\nvariant = \"gmres_dr\"\nm = 40\nk = 10\n"
    ))?;
    let plain = RunConfig::from_toml_str(&format!("{BASE}[solver]\nvariant = \"gmres\"\nm = 40\n"))?;
    print!("{}", compare(&[fdr.clone(), lusgs, plain])?);
    print!("{}", subdomain_sweep(&fdr, &[1, 2, 4, 8])?);
    Ok(())
}
