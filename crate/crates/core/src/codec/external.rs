//! External encoder/decoder driven through shell command templates.
//!
//! Templates are expanded and run with `sh -c`. Placeholders:
//! `{in}` input file, `{out}` output file, `{w}` `{h}` frame size, `{qp}`
//! quantization parameter, `{lossless}` the configured lossless flag string
//! (empty for lossy encodes). Frames are exchanged as raw 10-bit 4:4:4 files.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::yuv::{read_yuv444p10, write_yuv444p10};
use crate::error::{Error, Result};
use crate::maps::Image10;

pub const ENCODE_PLACEHOLDERS: [&str; 6] = ["{in}", "{out}", "{w}", "{h}", "{qp}", "{lossless}"];
pub const DECODE_PLACEHOLDERS: [&str; 2] = ["{in}", "{out}"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalBackend {
    pub name: String,
    pub encode: String,
    pub decode: String,
    #[serde(default)]
    pub lossless_flag: String,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
}

fn default_parallel() -> usize {
    1
}

impl ExternalBackend {
    pub fn validate(&self) -> Result<()> {
        for p in ENCODE_PLACEHOLDERS {
            if !self.encode.contains(p) {
                return Err(Error::Config(format!("encode template lacks {p}")));
            }
        }
        for p in DECODE_PLACEHOLDERS {
            if !self.decode.contains(p) {
                return Err(Error::Config(format!("decode template lacks {p}")));
            }
        }
        if self.max_parallel == 0 {
            return Err(Error::Config("max_parallel must be >= 1".into()));
        }
        Ok(())
    }

    /// Reads `GSMAP_ENCODE_CMD`, `GSMAP_DECODE_CMD` and optionally
    /// `GSMAP_LOSSLESS_FLAG`, `GSMAP_BACKEND_NAME`, `GSMAP_MAX_PARALLEL`.
    pub fn from_env() -> Option<Result<ExternalBackend>> {
        let encode = std::env::var("GSMAP_ENCODE_CMD").ok()?;
        let decode = std::env::var("GSMAP_DECODE_CMD").ok()?;
        let backend = ExternalBackend {
            name: std::env::var("GSMAP_BACKEND_NAME").unwrap_or_else(|_| "env".into()),
            encode,
            decode,
            lossless_flag: std::env::var("GSMAP_LOSSLESS_FLAG").unwrap_or_default(),
            max_parallel: std::env::var("GSMAP_MAX_PARALLEL").ok().and_then(|v| v.parse().ok()).unwrap_or(1),
        };
        Some(backend.validate().map(|_| backend))
    }

    pub fn from_json(text: &str) -> Result<ExternalBackend> {
        let backend: ExternalBackend =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("backend config: {e}")))?;
        backend.validate()?;
        Ok(backend)
    }

    pub fn encode(&self, image: &Image10, lossless: bool, qp: u32) -> Result<Vec<u8>> {
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("frame.yuv");
        let output = dir.path().join("frame.bin");
        fs::write(&input, write_yuv444p10(image)?)?;
        let flag = if lossless { self.lossless_flag.as_str() } else { "" };
        run(&expand(&self.encode, &input, &output, image.side, qp, flag))?;
        read_output(&output)
    }

    pub fn decode(&self, bytes: &[u8], side: usize, lossless: bool, qp: u32) -> Result<Image10> {
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("frame.bin");
        let output = dir.path().join("frame.yuv");
        fs::write(&input, bytes)?;
        let flag = if lossless { self.lossless_flag.as_str() } else { "" };
        run(&expand(&self.decode, &input, &output, side, qp, flag))?;
        read_yuv444p10(&read_output(&output)?, side)
    }
}

fn expand(template: &str, input: &Path, output: &Path, side: usize, qp: u32, lossless: &str) -> String {
    template
        .replace("{in}", &input.display().to_string())
        .replace("{out}", &output.display().to_string())
        .replace("{w}", &side.to_string())
        .replace("{h}", &side.to_string())
        .replace("{qp}", &qp.to_string())
        .replace("{lossless}", lossless)
}

fn run(command: &str) -> Result<()> {
    let out = Command::new("sh").arg("-c").arg(command).output().map_err(|e| Error::Backend {
        msg: format!("failed to spawn '{command}': {e}"),
        diagnostics: String::new(),
    })?;
    if !out.status.success() {
        let mut diagnostics = String::from_utf8_lossy(&out.stderr).into_owned();
        diagnostics.push_str(&String::from_utf8_lossy(&out.stdout));
        return Err(Error::Backend { msg: format!("'{command}' exited with {}", out.status), diagnostics });
    }
    Ok(())
}

fn read_output(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Backend {
        msg: format!("backend produced no output at {}: {e}", path.display()),
        diagnostics: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn copy_backend() -> ExternalBackend {
        ExternalBackend {
            name: "copy".into(),
            encode: "cp {in} {out} # {w} {h} {qp} {lossless}".into(),
            decode: "cp {in} {out}".into(),
            lossless_flag: "--lossless".into(),
            max_parallel: 2,
        }
    }

    #[test]
    fn template_validation() {
        copy_backend().validate().unwrap();
        let mut b = copy_backend();
        b.encode = "cp {in} {out}".into();
        assert!(matches!(b.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn expansion() {
        let s = expand("enc -i {in} -o {out} -w {w} -h {h} -q {qp} {lossless}", Path::new("/a"), Path::new("/b"), 8, 22, "--ll");
        assert_eq!(s, "enc -i /a -o /b -w 8 -h 8 -q 22 --ll");
    }

    #[test]
    fn copy_roundtrip() {
        let img = Image10::from_samples(2, (0..12).collect()).unwrap();
        let b = copy_backend();
        let bytes = b.encode(&img, true, 0).unwrap();
        assert_eq!(b.decode(&bytes, 2, true, 0).unwrap(), img);
        // wrong dimensions are caught on decode
        assert!(matches!(b.decode(&bytes, 4, true, 0), Err(Error::Format(_))));
    }

    #[test]
    fn failing_command_reports_diagnostics() {
        let mut b = copy_backend();
        b.encode = "echo boom >&2; exit 3 # {in} {out} {w} {h} {qp} {lossless}".into();
        match b.encode(&Image10::new(1), false, 0) {
            Err(Error::Backend { diagnostics, .. }) => assert!(diagnostics.contains("boom")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
