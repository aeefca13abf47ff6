use sigaccess_bench::frame;
use sigaccess_core::decode_full;

#[test]
fn fixture_is_reproducible() {
    let a = frame(200, 46, 9, 3);
    let b = frame(200, 46, 9, 3);
    assert_eq!(a.arrived, b.arrived);
    assert_eq!(a.observation, b.observation);
    assert_eq!(a.codebook.len(), 1000);
    assert!(a.observation.is_complete());
}

#[test]
fn fixture_decodes_most_arrivals() {
    let f = frame(200, 46, 9, 8);
    let decoded = decode_full(&f.observation, f.codebook.signatures()).unwrap();
    let hits = f.arrived.iter().filter(|i| decoded.contains(i)).count();
    assert!(
        hits as f64 >= 0.9 * f.arrived.len() as f64,
        "{hits} of {}",
        f.arrived.len()
    );
}
