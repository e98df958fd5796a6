#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_pcrb::prior_pdf::GriddedPdf;

fuzz_target!(|data: &[u8]| {
    if let Ok(pdf) = GriddedPdf::read_csv(data) {
        assert!(pdf.density().iter().all(|v| v.is_finite() && *v >= 0.0));
        let mut buf = Vec::new();
        pdf.write_csv(&mut buf).unwrap();
        assert_eq!(GriddedPdf::read_csv(buf.as_slice()).unwrap(), pdf);
    }
});
