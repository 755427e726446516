#![no_main]

use libfuzzer_sys::fuzz_target;

// Parsed configs on small meshes must build (or reject) their initial pair
// without panicking.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = blockmono::cli::parse_config(text) else {
        return;
    };
    if cfg.mesh.nx > 12 || cfg.mesh.ny > 12 {
        return;
    }
    if let Ok(setup) = blockmono::cli::build_setup(&cfg) {
        let _ = blockmono::cli::check_setup(&setup);
    }
});
