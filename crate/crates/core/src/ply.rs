//! Binary little-endian PLY reader/writer for 3DGS point files.
//!
//! Only the `vertex` element is read. Extra scalar properties (normals,
//! colors) are skipped; all 59 Gaussian channels must be present as 32-bit
//! floats. ASCII and big-endian files are rejected.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cloud::{GaussianCloud, CHANNELS};
use crate::error::{Error, Result};

/// Gaussian property names in channel order.
pub fn channel_names() -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..45).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

#[derive(Debug)]
struct Property {
    name: String,
    size: usize,
    is_f32: bool,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
    has_list: bool,
}

impl Element {
    fn stride(&self) -> usize {
        self.props.iter().map(|p| p.size).sum()
    }
}

fn scalar_size(ty: &str) -> Option<usize> {
    Some(match ty {
        "char" | "uchar" | "int8" | "uint8" => 1,
        "short" | "ushort" | "int16" | "uint16" => 2,
        "int" | "uint" | "int32" | "uint32" | "float" | "float32" => 4,
        "double" | "float64" => 8,
        _ => return None,
    })
}

fn read_header<R: BufRead>(reader: &mut R) -> Result<Vec<Element>> {
    let mut line = String::new();
    let mut next_line = |reader: &mut R| -> Result<String> {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Schema("unexpected end of file in PLY header".into()));
        }
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    };

    if next_line(reader)? != "ply" {
        return Err(Error::Schema("missing 'ply' magic".into()));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let l = next_line(reader)?;
        let mut words = l.split_whitespace();
        match words.next() {
            Some("format") => {
                let fmt = words.next().unwrap_or("");
                if fmt != "binary_little_endian" {
                    return Err(Error::Schema(format!(
                        "unsupported PLY format '{fmt}', only binary_little_endian is accepted"
                    )));
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = words.next().unwrap_or("").to_string();
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Schema(format!("bad element line '{l}'")))?;
                elements.push(Element { name, count, props: Vec::new(), has_list: false });
            }
            Some("property") => {
                let elem = elements
                    .last_mut()
                    .ok_or_else(|| Error::Schema("property before any element".into()))?;
                let ty = words.next().unwrap_or("");
                if ty == "list" {
                    elem.has_list = true;
                    continue;
                }
                let size = scalar_size(ty)
                    .ok_or_else(|| Error::Schema(format!("unknown property type '{ty}'")))?;
                let name = words
                    .next()
                    .ok_or_else(|| Error::Schema(format!("bad property line '{l}'")))?;
                elem.props.push(Property {
                    name: name.to_string(),
                    size,
                    is_f32: matches!(ty, "float" | "float32"),
                });
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::Schema(format!("unknown header keyword '{other}'"))),
        }
    }
    if !saw_format {
        return Err(Error::Schema("missing format line".into()));
    }
    Ok(elements)
}

pub fn read_cloud<R: Read>(reader: R) -> Result<GaussianCloud> {
    let mut reader = BufReader::new(reader);
    let elements = read_header(&mut reader)?;

    let mut skip_bytes = 0usize;
    let mut vertex = None;
    for elem in &elements {
        if elem.name == "vertex" {
            vertex = Some(elem);
            break;
        }
        if elem.has_list {
            return Err(Error::Schema(format!(
                "element '{}' with list properties precedes vertex",
                elem.name
            )));
        }
        skip_bytes += elem.count * elem.stride();
    }
    let vertex = vertex.ok_or_else(|| Error::Schema("vertex".into()))?;
    if vertex.has_list {
        return Err(Error::Schema("vertex element has list properties".into()));
    }

    // byte offset of each channel within a vertex record
    let mut offsets = [0usize; CHANNELS];
    for (c, name) in channel_names().iter().enumerate() {
        let mut off = 0;
        let mut found = false;
        for p in &vertex.props {
            if &p.name == name {
                if !p.is_f32 {
                    return Err(Error::Schema(format!("{name} is not a float property")));
                }
                found = true;
                break;
            }
            off += p.size;
        }
        if !found {
            return Err(Error::Schema(name.clone()));
        }
        offsets[c] = off;
    }

    std::io::copy(&mut (&mut reader).take(skip_bytes as u64), &mut std::io::sink())?;

    let n = vertex.count;
    let stride = vertex.stride();
    let mut record = vec![0u8; stride];
    let mut cloud = GaussianCloud::zeros(n);
    let mut row = [0f32; CHANNELS];
    for i in 0..n {
        reader.read_exact(&mut record).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Schema(format!("file truncated at vertex {i} of {n}"))
            } else {
                Error::Io(e)
            }
        })?;
        for (c, &off) in offsets.iter().enumerate() {
            let v = f32::from_le_bytes(record[off..off + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Data {
                    index: i,
                    msg: format!("non-finite {}", channel_names()[c]),
                });
            }
            row[c] = v;
        }
        cloud.set_row(i, &row);
    }
    if n == 0 {
        return Err(Error::Shape("cloud has no primitives".into()));
    }
    Ok(cloud)
}

pub fn write_cloud<W: Write>(cloud: &GaussianCloud, writer: W) -> Result<()> {
    cloud.validate()?;
    let mut w = BufWriter::new(writer);
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for name in channel_names() {
        writeln!(w, "property float {name}")?;
    }
    writeln!(w, "end_header")?;
    for i in 0..cloud.len() {
        for v in cloud.row(i) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_cloud(path: impl AsRef<Path>) -> Result<GaussianCloud> {
    read_cloud(File::open(path)?)
}

/// Writes the cloud through a temporary file in the same directory, so the
/// target either holds the complete cloud or is left untouched.
pub fn save_cloud(cloud: &GaussianCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    cloud.validate()?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write_cloud(cloud, tmp.as_file_mut())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
