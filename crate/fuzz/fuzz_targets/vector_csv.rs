#![no_main]

use crackfem::io::{read_vector_csv, write_vector_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = read_vector_csv(data) {
        let mut buf = Vec::new();
        write_vector_csv(&mut buf, &v).expect("write");
        assert_eq!(read_vector_csv(&buf[..]).expect("reread"), v);
    }
});
