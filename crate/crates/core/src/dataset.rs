//! MNIST-style image sets in the IDX container format.
//!
//! Pixels are stored row-major as `f64` in `[0, 1]` (byte / 255).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const NUM_CLASSES: usize = 10;
/// Side of a square block averaged by [`downsample_mean`].
pub const POOL: usize = 4;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        file: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("{file}: truncated, expected {expected} bytes of payload, got {got}")]
    Truncated {
        file: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {0} is not a class index")]
    LabelRange(u8),
    #[error("expected a {expected_rows}x{expected_cols} image, got {got} pixels")]
    Shape {
        expected_rows: usize,
        expected_cols: usize,
        got: usize,
    },
    #[error("empty image set")]
    Empty,
    #[error("batch size must be at least 1")]
    BatchSize,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" | "t10k" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?} (train or test)")),
        }
    }
}

fn read_exact_or(
    src: &mut impl Read,
    buf: &mut [u8],
    file: &'static str,
) -> Result<(), DatasetError> {
    let mut got = 0;
    while got < buf.len() {
        match src.read(&mut buf[got..]) {
            Ok(0) => {
                return Err(DatasetError::Truncated {
                    file,
                    expected: buf.len(),
                    got,
                })
            }
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn read_u32(src: &mut impl Read, file: &'static str) -> Result<u32, DatasetError> {
    let mut b = [0u8; 4];
    read_exact_or(src, &mut b, file)?;
    Ok(u32::from_be_bytes(b))
}

fn read_header(
    src: &mut impl Read,
    file: &'static str,
    magic: u32,
    dims: usize,
) -> Result<Vec<usize>, DatasetError> {
    let found = read_u32(src, file)?;
    if found != magic {
        return Err(DatasetError::BadMagic {
            file,
            expected: magic,
            found,
        });
    }
    (0..dims)
        .map(|_| read_u32(src, file).map(|v| v as usize))
        .collect()
}

/// Parses an image file and a label file.
pub fn load_idx(images: impl Read, labels: impl Read) -> Result<ImageSet, DatasetError> {
    let (mut images, mut labels) = (images, labels);
    let dims = read_header(&mut images, "images", IMAGE_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let ldims = read_header(&mut labels, "labels", LABEL_MAGIC, 1)?;
    if ldims[0] != count {
        return Err(DatasetError::CountMismatch {
            images: count,
            labels: ldims[0],
        });
    }
    let mut pixels = vec![0u8; count * rows * cols];
    read_exact_or(&mut images, &mut pixels, "images")?;
    let mut raw_labels = vec![0u8; count];
    read_exact_or(&mut labels, &mut raw_labels, "labels")?;
    let labels = raw_labels
        .iter()
        .map(|&l| {
            if (l as usize) < NUM_CLASSES {
                Ok(l as usize)
            } else {
                Err(DatasetError::LabelRange(l))
            }
        })
        .collect::<Result<_, _>>()?;
    let images = if rows * cols == 0 {
        vec![Vec::new(); count]
    } else {
        pixels
            .chunks(rows * cols)
            .map(|c| c.iter().map(|&p| f64::from(p) / 255.0).collect())
            .collect()
    };
    Ok(ImageSet {
        rows,
        cols,
        images,
        labels,
    })
}

/// Loads `<prefix>-images-idx3-ubyte` and `<prefix>-labels-idx1-ubyte`
/// from `dir`.
pub fn load_split(dir: &Path, split: Split) -> Result<ImageSet, DatasetError> {
    let open = |kind: &str, n: u8| -> Result<BufReader<File>, DatasetError> {
        let path = dir.join(format!("{}-{kind}-idx{n}-ubyte", split.prefix()));
        File::open(&path)
            .map(BufReader::new)
            .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
    };
    load_idx(open("images", 3)?, open("labels", 1)?)
}

/// Writes the set back in IDX form; pixels are rounded to the nearest byte.
pub fn write_idx(set: &ImageSet, images: impl Write, labels: impl Write) -> io::Result<()> {
    let (mut images, mut labels) = (BufWriter::new(images), BufWriter::new(labels));
    let n = set.images.len() as u32;
    images.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    for v in [n, set.rows as u32, set.cols as u32] {
        images.write_all(&v.to_be_bytes())?;
    }
    for img in &set.images {
        let bytes: Vec<u8> = img
            .iter()
            .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        images.write_all(&bytes)?;
    }
    labels.write_all(&LABEL_MAGIC.to_be_bytes())?;
    labels.write_all(&n.to_be_bytes())?;
    let bytes: Vec<u8> = set.labels.iter().map(|&l| l as u8).collect();
    labels.write_all(&bytes)?;
    images.flush()?;
    labels.flush()
}

/// Mean of each `POOL x POOL` block of a 28x28 image, giving 7x7.
pub fn downsample_mean(image: &[f64]) -> Result<Vec<f64>, DatasetError> {
    pool_mean(image, 28, 28)
}

/// Block means for any image whose sides are multiples of [`POOL`]. Each
/// block is summed pairwise in row-major order.
pub fn pool_mean(image: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>, DatasetError> {
    if image.len() != rows * cols || rows % POOL != 0 || cols % POOL != 0 {
        return Err(DatasetError::Shape {
            expected_rows: rows,
            expected_cols: cols,
            got: image.len(),
        });
    }
    let (out_r, out_c) = (rows / POOL, cols / POOL);
    let mut out = Vec::with_capacity(out_r * out_c);
    for br in 0..out_r {
        for bc in 0..out_c {
            let mut block = [0.0; POOL * POOL];
            for (k, v) in block.iter_mut().enumerate() {
                *v = image[(br * POOL + k / POOL) * cols + bc * POOL + k % POOL];
            }
            // pairwise sums, so a constant block keeps its exact value
            let mut n = block.len();
            while n > 1 {
                n /= 2;
                for k in 0..n {
                    block[k] = block[2 * k] + block[2 * k + 1];
                }
            }
            out.push(block[0] / (POOL * POOL) as f64);
        }
    }
    Ok(out)
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn width(&self) -> usize {
        self.rows * self.cols
    }

    pub fn downsampled(&self) -> Result<ImageSet, DatasetError> {
        Ok(ImageSet {
            rows: self.rows / POOL,
            cols: self.cols / POOL,
            images: self
                .images
                .iter()
                .map(|img| pool_mean(img, self.rows, self.cols))
                .collect::<Result<_, _>>()?,
            labels: self.labels.clone(),
        })
    }

    /// The first `n` images (all of them if fewer).
    pub fn take(&self, n: usize) -> ImageSet {
        let n = n.min(self.len());
        ImageSet {
            rows: self.rows,
            cols: self.cols,
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

pub fn one_hot(label: usize) -> Vec<f64> {
    let mut t = vec![0.0; NUM_CLASSES];
    t[label] = 1.0;
    t
}

/// Consecutive samples with flat inputs and one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub targets: Vec<Vec<f64>>,
}

impl Batch {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> Self {
        let targets = labels.iter().map(|&l| one_hot(l)).collect();
        Self {
            inputs,
            labels,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Joins batches in order.
    pub fn concat<'a>(batches: impl IntoIterator<Item = &'a Batch>) -> Batch {
        let mut out = Batch::new(Vec::new(), Vec::new());
        for b in batches {
            out.inputs.extend(b.inputs.iter().cloned());
            out.labels.extend(&b.labels);
            out.targets.extend(b.targets.iter().cloned());
        }
        out
    }
}

/// Splits the set in file order; the last batch may be shorter.
pub fn make_batches(set: &ImageSet, batch_size: usize) -> Result<Vec<Batch>, DatasetError> {
    if batch_size == 0 {
        return Err(DatasetError::BatchSize);
    }
    if set.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(set
        .images
        .chunks(batch_size)
        .zip(set.labels.chunks(batch_size))
        .map(|(x, l)| Batch::new(x.to_vec(), l.to_vec()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ImageSet {
        ImageSet {
            rows: 2,
            cols: 3,
            images: vec![
                [0u8, 1, 127, 128, 254, 255].iter().map(|&b| f64::from(b) / 255.0).collect(),
                vec![0.0; 6],
            ],
            labels: vec![3, 9],
        }
    }

    fn encode(set: &ImageSet) -> (Vec<u8>, Vec<u8>) {
        let (mut i, mut l) = (Vec::new(), Vec::new());
        write_idx(set, &mut i, &mut l).unwrap();
        (i, l)
    }

    #[test]
    fn round_trip() {
        let set = fixture();
        let (i, l) = encode(&set);
        assert_eq!(&i[..4], &[0, 0, 8, 3]);
        assert_eq!(l[8], 3);
        let back = load_idx(&i[..], &l[..]).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn distinct_errors() {
        let (i, l) = encode(&fixture());
        let mut bad = i.clone();
        bad[3] = 1;
        assert!(matches!(load_idx(&bad[..], &l[..]), Err(DatasetError::BadMagic { .. })));
        assert!(matches!(
            load_idx(&i[..i.len() - 1], &l[..]),
            Err(DatasetError::Truncated { file: "images", .. })
        ));
        let mut short = l.clone();
        short[7] = 1;
        assert!(matches!(
            load_idx(&i[..], &short[..]),
            Err(DatasetError::CountMismatch { images: 2, labels: 1 })
        ));
        let mut label = l.clone();
        label[9] = 10;
        assert!(matches!(load_idx(&i[..], &label[..]), Err(DatasetError::LabelRange(10))));
    }

    #[test]
    fn single_block() {
        let mut img = vec![0.0; 784];
        for r in 8..12 {
            for c in 4..8 {
                img[r * 28 + c] = 1.0;
            }
        }
        let out = downsample_mean(&img).unwrap();
        assert_eq!(out.len(), 49);
        for (p, &v) in out.iter().enumerate() {
            assert_eq!(v, if p == 2 * 7 + 1 { 1.0 } else { 0.0 });
        }
        assert!(matches!(downsample_mean(&[0.0; 10]), Err(DatasetError::Shape { .. })));
    }

    #[test]
    fn batches() {
        let set = ImageSet {
            rows: 1,
            cols: 1,
            images: (0..250).map(|k| vec![k as f64 / 250.0]).collect(),
            labels: (0..250).map(|k| k % 10).collect(),
        };
        let b = make_batches(&set, 100).unwrap();
        assert_eq!(b.iter().map(Batch::len).collect::<Vec<_>>(), vec![100, 100, 50]);
        assert_eq!(b[0].targets[3], one_hot(3));
        assert_eq!(Batch::concat(&b).inputs, set.images);
        assert!(matches!(make_batches(&set, 0), Err(DatasetError::BatchSize)));
        assert!(matches!(make_batches(&set.take(0), 5), Err(DatasetError::Empty)));
    }
}
