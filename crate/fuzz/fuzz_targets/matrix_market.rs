#![no_main]

use crackfem::sparse::read_matrix_market;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(k) = read_matrix_market(data) {
        let mut buf = Vec::new();
        k.write_matrix_market(&mut buf).expect("write");
        let back = read_matrix_market(&buf[..]).expect("reread");
        assert_eq!(back.n, k.n);
    }
});
