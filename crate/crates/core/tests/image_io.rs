use cellanalyzer_core::imaging::{load_gray, load_mask, BitDepth, ImagingError};
use image::{ImageBuffer, Luma, Rgb};

#[test]
fn sixteen_bit_tiff_keeps_dimensions_and_depth() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frame.tif");
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(1022, 1024, |x, y| Luma([(x * 37 + y) as u16]));
    buf.save(&path).unwrap();
    let img = load_gray(&path).unwrap();
    assert_eq!((img.width(), img.height()), (1022, 1024));
    assert_eq!(img.bit_depth(), BitDepth::Sixteen);
    assert_eq!(img.get(3, 5), 5 * 37 + 3);
}

#[test]
fn all_zero_png_is_blank_mask() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mask.png");
    ImageBuffer::<Luma<u8>, _>::new(17, 9).save(&path).unwrap();
    let m = load_mask(&path).unwrap();
    assert_eq!((m.width(), m.height()), (17, 9));
    assert_eq!(m.count_foreground(), 0);
}

#[test]
fn pgm_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.pgm");
    std::fs::write(&path, b"P2\n3 2\n255\n0 10 20\n30 40 255\n").unwrap();
    let img = load_gray(&path).unwrap();
    assert_eq!(img.to_u8_vec(), vec![0, 10, 20, 30, 40, 255]);
}

#[test]
fn truncated_file_is_unreadable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.png");
    ImageBuffer::<Luma<u8>, _>::from_fn(64, 64, |x, y| Luma([(x ^ y) as u8]))
        .save(&path)
        .unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(load_gray(&path), Err(ImagingError::Unreadable { .. })));
    assert!(matches!(
        load_gray(&dir.path().join("missing.png")),
        Err(ImagingError::Unreadable { .. })
    ));
}

#[test]
fn rgb_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rgb.png");
    ImageBuffer::<Rgb<u8>, _>::new(4, 4).save(&path).unwrap();
    assert!(matches!(load_gray(&path), Err(ImagingError::MultiChannel { .. })));
}
