use halolab::{axioms, Caps, Halo};
use std::time::Instant;

fn main() {
    for (spec, work) in [
        ("lighter:2", 4_000_000u64),
        ("juggler:1", 1_000_000),
        ("designer:2", 200_000),
        ("cloner:2", 200_000),
        ("nil2:2", 200_000),
    ] {
        let mut caps = Caps::default();
        caps.pair_work = work;
        let halo = Halo::parse(spec, "Z").unwrap();
        let t = Instant::now();
        let rep = axioms::full_scan_segment(&halo, 6, 1, &caps).unwrap();
        eprintln!(
            "{spec}: {:?} checked={} skipped={} pairs={} in {:?}",
            rep.verdict, rep.classes_checked, rep.classes_skipped, rep.pairs_scanned, t.elapsed()
        );
    }
}
