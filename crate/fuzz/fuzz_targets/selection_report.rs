#![no_main]

use gbafs::report::SelectionReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = SelectionReport::from_json(text) {
        // an accepted report must survive a round trip
        let again = SelectionReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(again.selected_indices(), r.selected_indices());
    }
});
