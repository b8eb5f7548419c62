#![no_main]

use gbafs::dataio::{parse_csv, LabelColumn};
use libfuzzer_sys::fuzz_target;

// First byte picks the label column; the rest is the file.
fuzz_target!(|data: &[u8]| {
    let Some((&pick, body)) = data.split_first() else { return };
    let label = match pick % 3 {
        0 => LabelColumn::Name("label".into()),
        1 => LabelColumn::Index(usize::from(pick >> 2)),
        _ => LabelColumn::Name("class".into()),
    };
    if let Ok(d) = parse_csv(body, &label) {
        assert_eq!(d.instances().nrows(), d.labels().len());
        assert_eq!(d.instances().ncols(), d.feature_names().len());
        assert!(d.labels().iter().all(|&l| l < d.class_ids().len()));
    }
});
