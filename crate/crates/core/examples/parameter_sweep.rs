//! A small alpha x eps sweep through the harness, as `cmflow sweep` runs it.
//! Set CMFLOW_THREADS to cap the pool.

use cmflow::harness::{sweep, RunConfig};

const CONFIG: &str = r#"
n_dim = 3
k = 2
alpha = 1.0

[psi]
family = "power_of_base"
params = { eps = 0.1 }

[grid]
variant = "axisym"
resolution = 48

[initial]
modes = [{ degree = 2, amplitude = 0.05 }]

[flow]
monitor_every = 200

[sweep]
alpha = [0.75, 1.0, 1.5]
eps = [-0.1, 0.2]
"#;

fn main() -> cmflow::Result<()> {
    let mut cfg = RunConfig::from_toml(CONFIG)?;
    cfg.output.dir = std::env::temp_dir().join("cmflow-sweep-example");
    let out = sweep(&cfg)?;
    print!("{}", out.report);
    println!("exit status {}; aggregate in {}", out.code, out.artifacts[0].display());
    Ok(())
}
