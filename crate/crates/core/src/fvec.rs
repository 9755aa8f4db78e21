//! Dense feature-vector container.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic    4 bytes  "FVEC"
//! version  u32      1
//! count    u64      number of records
//! records  count × { len: u64, values: len × f64 }
//! ```
//!
//! A CSV mirror (`index,label,v0,v1,...`) is written alongside for debugging.

use std::io::{self, Read, Write};
use std::path::Path;

use crate::{Error, Liveness, Result};

const MAGIC: &[u8; 4] = b"FVEC";
const VERSION: u32 = 1;

pub fn write_vectors<W: Write>(mut w: W, vectors: &[Vec<f64>]) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(vectors.len() as u64).to_le_bytes())?;
    for v in vectors {
        w.write_all(&(v.len() as u64).to_le_bytes())?;
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_vectors<R: Read>(mut r: R) -> Result<Vec<Vec<f64>>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid("not a feature vector file (bad magic)"));
    }
    let mut version = [0u8; 4];
    r.read_exact(&mut version)?;
    if u32::from_le_bytes(version) != VERSION {
        return Err(Error::invalid(format!(
            "unsupported feature file version {}",
            u32::from_le_bytes(version)
        )));
    }
    let count = read_u64(&mut r)?;
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let len = read_u64(&mut r)? as usize;
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes)?;
        out.push(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect(),
        );
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::invalid("trailing bytes after feature records"));
    }
    Ok(out)
}

pub fn save(path: &Path, vectors: &[Vec<f64>]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_vectors(io::BufWriter::new(f), vectors).map_err(|e| Error::file(path, e))
}

pub fn load(path: &Path) -> Result<Vec<Vec<f64>>> {
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_vectors(io::BufReader::new(f)).map_err(|e| match e {
        Error::File { .. } => e,
        other => Error::file(path, other),
    })
}

pub fn write_csv<W: Write>(mut w: W, vectors: &[Vec<f64>], labels: &[Liveness]) -> io::Result<()> {
    let dim = vectors.first().map_or(0, Vec::len);
    write!(w, "index,label")?;
    for j in 0..dim {
        write!(w, ",v{j}")?;
    }
    writeln!(w)?;
    for (i, (v, label)) in vectors.iter().zip(labels).enumerate() {
        write!(w, "{i},{label}")?;
        for x in v {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(vectors in prop::collection::vec(prop::collection::vec(any::<f64>(), 0..40), 0..10)) {
            let mut buf = Vec::new();
            write_vectors(&mut buf, &vectors).unwrap();
            let back = read_vectors(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), vectors.len());
            for (a, b) in back.iter().zip(&vectors) {
                prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                                b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn exact_layout() {
        let mut buf = Vec::new();
        write_vectors(&mut buf, &[vec![1.0]]).unwrap();
        let mut want = b"FVEC".to_vec();
        want.extend(1u32.to_le_bytes());
        want.extend(1u64.to_le_bytes());
        want.extend(1u64.to_le_bytes());
        want.extend(1.0f64.to_le_bytes());
        assert_eq!(buf, want);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_vectors(&b"NOPE\x01\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_vectors(&mut buf, &[vec![1.0, 2.0]]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_vectors(buf.as_slice()).is_err());
        let mut extra = Vec::new();
        write_vectors(&mut extra, &[vec![1.0]]).unwrap();
        extra.push(0);
        assert!(read_vectors(extra.as_slice()).is_err());
    }

    #[test]
    fn csv_mirror() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[vec![0.5, 1.0]], &[Liveness::Fake]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,label,v0,v1\n0,fake,0.5,1\n");
    }
}
