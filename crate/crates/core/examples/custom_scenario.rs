//! Scenarios round-trip through TOML; a run writes hashed artifacts and a manifest.
use dpp_lab::lab::{run, Command, RunConfig, SolveKind};
use dpp_lab::scenario::{builtin, Scenario};

fn main() -> dpp_lab::Result<()> {
    let mut s = builtin("dirac-2d").expect("built-in");
    s.name = "my-dirac".into();
    s.params.eps = 0.1;
    s.h = 0.025;
    let text = s.to_toml_string()?;
    let back = Scenario::from_toml_str(&text)?;
    assert_eq!(back.hash(), s.hash());

    let dir = std::env::temp_dir().join("dpp-lab-example");
    let path = dir.join("my-dirac.toml");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(&path, text)?;
    let cfg = RunConfig {
        scenario: Some(path.display().to_string()),
        out: dir.clone(),
        ..Default::default()
    };
    let out = run(Command::Solve(SolveKind::Dpp), &cfg)?;
    println!("wrote {}", out.dir.display());
    for f in &out.manifest.outputs {
        println!("  {} {} bytes sha256 {}", f.name, f.bytes, &f.sha256[..16]);
    }
    Ok(())
}
