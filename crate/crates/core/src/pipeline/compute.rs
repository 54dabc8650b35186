/// L1 adder configuration of one PE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum L1Config {
    /// `00`: every product passes through.
    #[default]
    C1,
    /// `01`: `(p0 + p1, p2)`.
    C2,
    /// `10`: `(p0, p1 + p2)`.
    C3,
    /// `11`: `p0 + p1 + p2`.
    C4,
}

impl L1Config {
    pub fn bits(self) -> u8 {
        match self {
            L1Config::C1 => 0b00,
            L1Config::C2 => 0b01,
            L1Config::C3 => 0b10,
            L1Config::C4 => 0b11,
        }
    }

    pub fn from_bits(bits: u8) -> Self {
        match bits & 0b11 {
            0b00 => L1Config::C1,
            0b01 => L1Config::C2,
            0b10 => L1Config::C3,
            _ => L1Config::C4,
        }
    }

    /// Configuration that separates threads exactly at the given
    /// boundaries (`split01` between threads 0 and 1, `split12` between 1
    /// and 2).
    pub fn from_boundaries(split01: bool, split12: bool) -> Self {
        match (split01, split12) {
            (false, false) => L1Config::C4,
            (true, false) => L1Config::C3,
            (false, true) => L1Config::C2,
            (true, true) => L1Config::C1,
        }
    }

    /// Index of the first thread of each output group.
    pub fn group_starts(self) -> &'static [usize] {
        match self {
            L1Config::C1 => &[0, 1, 2],
            L1Config::C2 => &[0, 2],
            L1Config::C3 => &[0, 1],
            L1Config::C4 => &[0],
        }
    }
}

/// Outputs of one L1 adder, in thread order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct L1Sums {
    vals: [i32; 3],
    len: u8,
}

impl L1Sums {
    pub fn as_slice(&self) -> &[i32] {
        &self.vals[..self.len as usize]
    }
}

pub fn l1_reduce(p: [i32; 3], config: L1Config) -> L1Sums {
    let (vals, len) = match config {
        L1Config::C1 => (p, 3),
        L1Config::C2 => ([p[0] + p[1], p[2], 0], 2),
        L1Config::C3 => ([p[0], p[1] + p[2], 0], 2),
        L1Config::C4 => ([p[0] + p[1] + p[2], 0, 0], 1),
    };
    L1Sums { vals, len }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adder_configurations() {
        assert_eq!(l1_reduce([2, 3, 4], L1Config::C4).as_slice(), &[9]);
        assert_eq!(l1_reduce([2, 3, 4], L1Config::C1).as_slice(), &[2, 3, 4]);
        assert_eq!(l1_reduce([2, 3, 4], L1Config::C2).as_slice(), &[5, 4]);
        assert_eq!(l1_reduce([2, 3, 4], L1Config::C3).as_slice(), &[2, 7]);
    }

    #[test]
    fn zero_padding_degenerates() {
        for c in [L1Config::C1, L1Config::C2, L1Config::C3, L1Config::C4] {
            assert_eq!(l1_reduce([-6, 0, 0], c).as_slice()[0], -6);
            assert_eq!(l1_reduce([-6, 0, 0], c).as_slice().iter().sum::<i32>(), -6);
        }
    }

    #[test]
    fn bits_round_trip() {
        for b in 0..4 {
            assert_eq!(L1Config::from_bits(b).bits(), b);
        }
        assert_eq!(L1Config::from_boundaries(false, false), L1Config::C4);
        assert_eq!(L1Config::from_boundaries(true, true), L1Config::C1);
    }
}
