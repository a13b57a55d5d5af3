//! Writes a synthetic four-class dataset tree.
//!
//! cargo run --example make_synth -- <root> [clips-per-class] [singers] [seed]

use std::path::PathBuf;

use prosody::synth::{write_synth_dataset, SynthSpec};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(root) = args.first().map(PathBuf::from) else {
        eprintln!("usage: make_synth <root> [clips-per-class] [singers] [seed]");
        std::process::exit(1);
    };
    let num = |i: usize, default: u64| args.get(i).map_or(Ok(default), |s| s.parse()).unwrap_or_else(|e| {
        eprintln!("bad argument {:?}: {e}", args[i]);
        std::process::exit(1)
    });
    let spec = SynthSpec {
        clips_per_class: num(1, 100) as usize,
        singers: num(2, 1) as usize,
        seed: num(3, 0),
        ..Default::default()
    };
    match write_synth_dataset(&root, &spec) {
        Ok(n) => println!("wrote {n} clips under {}", root.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
