//! Little-endian primitives shared by the on-disk formats.

use std::io::{self, Read, Write};

pub(crate) trait WriteLe: Write {
    fn put_u8(&mut self, v: u8) -> io::Result<()> {
        self.write_all(&[v])
    }
    fn put_u16(&mut self, v: u16) -> io::Result<()> {
        self.write_all(&v.to_le_bytes())
    }
    fn put_u32(&mut self, v: u32) -> io::Result<()> {
        self.write_all(&v.to_le_bytes())
    }
    fn put_u64(&mut self, v: u64) -> io::Result<()> {
        self.write_all(&v.to_le_bytes())
    }
    fn put_f64(&mut self, v: f64) -> io::Result<()> {
        self.write_all(&v.to_le_bytes())
    }
    fn put_f32(&mut self, v: f64) -> io::Result<()> {
        self.write_all(&(v as f32).to_le_bytes())
    }
    fn put_f16(&mut self, v: f64) -> io::Result<()> {
        self.write_all(&half::f16::from_f64(v).to_le_bytes())
    }
}

impl<W: Write + ?Sized> WriteLe for W {}

pub(crate) trait ReadLe: Read {
    fn get_array<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn get_u8(&mut self) -> io::Result<u8> {
        Ok(self.get_array::<1>()?[0])
    }
    fn get_u16(&mut self) -> io::Result<u16> {
        Ok(u16::from_le_bytes(self.get_array()?))
    }
    fn get_u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.get_array()?))
    }
    fn get_u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.get_array()?))
    }
    fn get_f64(&mut self) -> io::Result<f64> {
        Ok(f64::from_le_bytes(self.get_array()?))
    }
    fn get_f32(&mut self) -> io::Result<f64> {
        Ok(f32::from_le_bytes(self.get_array()?) as f64)
    }
    fn get_f16(&mut self) -> io::Result<f64> {
        Ok(half::f16::from_le_bytes(self.get_array()?).to_f64())
    }
}

impl<R: Read + ?Sized> ReadLe for R {}
