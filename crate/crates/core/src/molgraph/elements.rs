//! Periodic-table subset used for featurization (Z = 1..=53).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementInfo {
    pub symbol: &'static str,
    pub z: u8,
    pub mass: f64,
    /// Pauling scale; 0 for noble gases.
    pub electronegativity: f64,
    /// Single-bond covalent radius in Å.
    pub covalent_radius: f64,
}

macro_rules! elements {
    ($( $z:literal $sym:literal $mass:literal $en:literal $rcov:literal ;)*) => {
        &[ $( ElementInfo { symbol: $sym, z: $z, mass: $mass, electronegativity: $en, covalent_radius: $rcov } ),* ]
    };
}

pub const ELEMENTS: &[ElementInfo] = elements! {
    1 "H" 1.008 2.20 0.31;
    2 "He" 4.003 0.0 0.28;
    3 "Li" 6.94 0.98 1.28;
    4 "Be" 9.012 1.57 0.96;
    5 "B" 10.81 2.04 0.84;
    6 "C" 12.011 2.55 0.76;
    7 "N" 14.007 3.04 0.71;
    8 "O" 15.999 3.44 0.66;
    9 "F" 18.998 3.98 0.57;
    10 "Ne" 20.180 0.0 0.58;
    11 "Na" 22.990 0.93 1.66;
    12 "Mg" 24.305 1.31 1.41;
    13 "Al" 26.982 1.61 1.21;
    14 "Si" 28.085 1.90 1.11;
    15 "P" 30.974 2.19 1.07;
    16 "S" 32.06 2.58 1.05;
    17 "Cl" 35.45 3.16 1.02;
    18 "Ar" 39.948 0.0 1.06;
    19 "K" 39.098 0.82 2.03;
    20 "Ca" 40.078 1.00 1.76;
    21 "Sc" 44.956 1.36 1.70;
    22 "Ti" 47.867 1.54 1.60;
    23 "V" 50.942 1.63 1.53;
    24 "Cr" 51.996 1.66 1.39;
    25 "Mn" 54.938 1.55 1.39;
    26 "Fe" 55.845 1.83 1.32;
    27 "Co" 58.933 1.88 1.26;
    28 "Ni" 58.693 1.91 1.24;
    29 "Cu" 63.546 1.90 1.32;
    30 "Zn" 65.38 1.65 1.22;
    31 "Ga" 69.723 1.81 1.22;
    32 "Ge" 72.630 2.01 1.20;
    33 "As" 74.922 2.18 1.19;
    34 "Se" 78.971 2.55 1.20;
    35 "Br" 79.904 2.96 1.20;
    36 "Kr" 83.798 3.00 1.16;
    37 "Rb" 85.468 0.82 2.20;
    38 "Sr" 87.62 0.95 1.95;
    39 "Y" 88.906 1.22 1.90;
    40 "Zr" 91.224 1.33 1.75;
    41 "Nb" 92.906 1.60 1.64;
    42 "Mo" 95.95 2.16 1.54;
    43 "Tc" 98.0 1.90 1.47;
    44 "Ru" 101.07 2.20 1.46;
    45 "Rh" 102.91 2.28 1.42;
    46 "Pd" 106.42 2.20 1.39;
    47 "Ag" 107.87 1.93 1.45;
    48 "Cd" 112.41 1.69 1.44;
    49 "In" 114.82 1.78 1.42;
    50 "Sn" 118.71 1.96 1.39;
    51 "Sb" 121.76 2.05 1.39;
    52 "Te" 127.60 2.10 1.38;
    53 "I" 126.90 2.66 1.39;
};

/// Case-insensitive lookup ("CL", "cl" and "Cl" all resolve).
pub fn lookup(symbol: &str) -> Option<&'static ElementInfo> {
    ELEMENTS.iter().find(|e| e.symbol.eq_ignore_ascii_case(symbol.trim()))
}

impl ElementInfo {
    pub fn period(&self) -> u8 {
        match self.z {
            1..=2 => 1,
            3..=10 => 2,
            11..=18 => 3,
            19..=36 => 4,
            _ => 5,
        }
    }

    pub fn group(&self) -> u8 {
        let z = self.z;
        match z {
            1 => 1,
            2 => 18,
            3..=18 => {
                let pos = (z - 3) % 8;
                if pos < 2 {
                    pos + 1
                } else {
                    pos + 11
                }
            }
            19..=36 => z - 18,
            _ => z - 36,
        }
    }

    pub fn is_halogen(&self) -> bool {
        matches!(self.z, 9 | 17 | 35 | 53)
    }

    pub fn is_metal(&self) -> bool {
        matches!(self.z, 3 | 4 | 11..=13 | 19..=31 | 37..=50)
    }
}
