//! Versioned binary checkpoints.
//!
//! Layout (little-endian): magic `WTNN`, format version `u32`, variant tag
//! `u8`, layer count `u32`, `layers + 1` widths `u32`, one activation flag
//! `u8` per layer, shortcut count `u32` and `(from, to)` pairs of `u32`,
//! parameter count `u64`, the parameters as `f64` in layout order, then the
//! Adam step `u64` and its first and second moments as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::adam::AdamState;
use super::arch::{NetArchitecture, Variant};
use super::network::Network;
use crate::binio::{put_f64s, put_u32, put_u64, Reader};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"WTNN";
pub const VERSION: u32 = 1;

pub fn write_checkpoint(net: &Network, w: &mut impl Write) -> Result<()> {
    let arch = net.arch();
    w.write_all(&MAGIC)?;
    put_u32(w, VERSION)?;
    w.write_all(&[arch.variant.tag()])?;
    put_u32(w, arch.num_layers() as u32)?;
    for &width in &arch.widths {
        put_u32(w, width as u32)?;
    }
    let flags: Vec<u8> = arch.activated.iter().map(|&a| a as u8).collect();
    w.write_all(&flags)?;
    put_u32(w, arch.shortcuts.len() as u32)?;
    for &(from, to) in &arch.shortcuts {
        put_u32(w, from as u32)?;
        put_u32(w, to as u32)?;
    }
    put_u64(w, net.params().len() as u64)?;
    put_f64s(w, net.params())?;
    let adam = net.optimizer();
    put_u64(w, adam.step)?;
    put_f64s(w, &adam.m)?;
    put_f64s(w, &adam.v)?;
    Ok(())
}

/// Upper bound on decoded dimensions, so a corrupt header cannot trigger a
/// huge allocation.
const MAX_DIM: u32 = 1 << 16;

pub fn read_checkpoint(r: impl Read) -> Result<Network> {
    let mut r = Reader::new(r);
    let mut magic = [0u8; 4];
    r.read_bytes(&mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected \"WTNN\"")));
    }
    let at = r.offset();
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(at, format!("unsupported checkpoint version {version}")));
    }
    let at = r.offset();
    let variant = Variant::from_tag(r.u8("variant tag")?)
        .ok_or_else(|| Error::format(at, "unknown variant tag"))?;
    let at = r.offset();
    let layers = r.u32("layer count")?;
    if layers == 0 || layers > MAX_DIM {
        return Err(Error::format(at, format!("implausible layer count {layers}")));
    }
    let mut widths = Vec::with_capacity(layers as usize + 1);
    for _ in 0..=layers {
        let at = r.offset();
        let w = r.u32("layer width")?;
        if w == 0 || w > MAX_DIM {
            return Err(Error::format(at, format!("implausible layer width {w}")));
        }
        widths.push(w as usize);
    }
    let mut activated = Vec::with_capacity(layers as usize);
    for _ in 0..layers {
        let at = r.offset();
        activated.push(match r.u8("activation flag")? {
            0 => false,
            1 => true,
            f => return Err(Error::format(at, format!("bad activation flag {f}"))),
        });
    }
    let at = r.offset();
    let n_short = r.u32("shortcut count")?;
    if n_short > MAX_DIM {
        return Err(Error::format(at, format!("implausible shortcut count {n_short}")));
    }
    let mut shortcuts = Vec::with_capacity(n_short as usize);
    for _ in 0..n_short {
        let from = r.u32("shortcut start")? as usize;
        let to = r.u32("shortcut end")? as usize;
        shortcuts.push((from, to));
    }
    let arch_end = r.offset();
    let arch = NetArchitecture {
        variant,
        widths,
        activated,
        shortcuts,
    };
    arch.validate()?;

    let expected = arch.param_count();
    let count = r.u64("parameter count")?;
    if count != expected as u64 {
        return Err(Error::shape(format!(
            "checkpoint stores {count} parameters but its architecture needs {expected} \
             (header ends at byte {arch_end})"
        )));
    }
    let mut params = vec![0.0; expected];
    r.f64s(&mut params, "parameters")?;
    let mut adam = AdamState::new(expected);
    adam.step = r.u64("optimizer step")?;
    r.f64s(&mut adam.m, "optimizer first moments")?;
    r.f64s(&mut adam.v, "optimizer second moments")?;
    let end = r.offset();
    if !r.at_eof()? {
        return Err(Error::format(end, "trailing bytes after checkpoint"));
    }
    Network::from_parts(arch, params, adam)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(net, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

/// Loads a checkpoint and insists it was saved with architecture `expected`.
pub fn load_checkpoint_as(path: impl AsRef<Path>, expected: &NetArchitecture) -> Result<Network> {
    let net = load_checkpoint(path)?;
    if net.arch() != expected {
        return Err(Error::shape(format!(
            "checkpoint holds a {} network ({} layers), expected {} ({} layers)",
            net.arch().variant.name(),
            net.arch().num_layers(),
            expected.variant.name(),
            expected.num_layers()
        )));
    }
    Ok(net)
}
