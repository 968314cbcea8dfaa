//! Random-phase source plane: geometry, phases, perturbations and the
//! information content of the source.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{self, StreamFamily};

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Smallest accepted ratio between propagation distance and wavelength.
pub const MIN_DISTANCE_OVER_WAVELENGTH: f64 = 1000.0;

/// Where the square lattice of source regions is anchored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LatticeCentering {
    /// A cell is centered on the optical axis.
    #[default]
    Origin,
    /// Cell corners touch the optical axis (centers at half-integer multiples of the pitch).
    HalfPitch,
}

impl LatticeCentering {
    fn offset(self) -> f64 {
        match self {
            LatticeCentering::Origin => 0.0,
            LatticeCentering::HalfPitch => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LatticeCentering::Origin => "origin",
            LatticeCentering::HalfPitch => "half-pitch",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "origin" => Ok(LatticeCentering::Origin),
            "half-pitch" | "half_pitch" => Ok(LatticeCentering::HalfPitch),
            other => Err(Error::Parse(format!("unknown lattice centering `{other}`"))),
        }
    }
}

/// Disc-shaped source plane divided into square regions.
///
/// All lengths are in meters. A region belongs to the source iff its center
/// lies strictly inside the disc of radius `radius`.
#[derive(Clone, Debug)]
pub struct SourceGeometry {
    wavelength: f64,
    radius: f64,
    distance: f64,
    region_pitch: f64,
    centering: LatticeCentering,
    regions: Arc<[[i32; 2]]>,
}

impl PartialEq for SourceGeometry {
    fn eq(&self, other: &Self) -> bool {
        self.wavelength == other.wavelength
            && self.radius == other.radius
            && self.distance == other.distance
            && self.region_pitch == other.region_pitch
            && self.centering == other.centering
    }
}

impl SourceGeometry {
    /// Geometry with region pitch equal to the wavelength.
    pub fn new(wavelength: f64, radius: f64, distance: f64) -> Result<Self> {
        Self::with_lattice(wavelength, radius, distance, wavelength, LatticeCentering::Origin)
    }

    pub fn with_lattice(
        wavelength: f64,
        radius: f64,
        distance: f64,
        region_pitch: f64,
        centering: LatticeCentering,
    ) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidGeometry(format!("wavelength must be positive, got {wavelength}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidGeometry(format!("radius must be positive, got {radius}")));
        }
        if !(region_pitch > 0.0 && region_pitch.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "region pitch must be positive, got {region_pitch}"
            )));
        }
        if !(distance.is_finite() && distance >= MIN_DISTANCE_OVER_WAVELENGTH * wavelength) {
            return Err(Error::InvalidGeometry(format!(
                "Fresnel regime violated: distance {distance} < {MIN_DISTANCE_OVER_WAVELENGTH} x wavelength"
            )));
        }
        let regions = enumerate_regions(radius / region_pitch, centering.offset());
        if regions.is_empty() {
            return Err(Error::InvalidGeometry(format!(
                "no region center lies inside radius {radius} (pitch {region_pitch})"
            )));
        }
        Ok(Self {
            wavelength,
            radius,
            distance,
            region_pitch,
            centering,
            regions: regions.into(),
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn region_pitch(&self) -> f64 {
        self.region_pitch
    }

    pub fn centering(&self) -> LatticeCentering {
        self.centering
    }

    /// Number of regions in the disc.
    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    /// Integer lattice coordinates of the regions, in storage order.
    pub fn lattice(&self) -> &[[i32; 2]] {
        &self.regions
    }

    /// Physical position (meters) of a lattice coordinate.
    pub fn position(&self, cell: [i32; 2]) -> [f64; 2] {
        let off = self.centering.offset();
        [
            (cell[0] as f64 + off) * self.region_pitch,
            (cell[1] as f64 + off) * self.region_pitch,
        ]
    }

    /// Speckle length scale `M = lambda z / (2 pi R)` in meters.
    pub fn speckle_scale(&self) -> f64 {
        self.wavelength * self.distance / (2.0 * PI * self.radius)
    }

    /// Amplitude contributed by one region of unit phasor: `pitch^2 / (lambda z)`.
    pub fn region_amplitude(&self) -> f64 {
        self.region_pitch * self.region_pitch / (self.wavelength * self.distance)
    }

    /// Ensemble mean intensity, `N_reg * region_amplitude^2`.
    ///
    /// For `pitch = lambda` this is `N_reg lambda^2 / z^2`, which approaches
    /// `pi R^2 / z^2` as the disc is resolved.
    pub fn mean_intensity(&self) -> f64 {
        let a = self.region_amplitude();
        self.n_regions() as f64 * a * a
    }
}

fn enumerate_regions(radius_in_pitch: f64, offset: f64) -> Vec<[i32; 2]> {
    let r2 = radius_in_pitch * radius_in_pitch;
    let n = radius_in_pitch.ceil() as i32 + 1;
    let mut cells = Vec::new();
    for j in -n..=n {
        let y = j as f64 + offset;
        for i in -n..=n {
            let x = i as f64 + offset;
            if x * x + y * y < r2 {
                cells.push([i, j]);
            }
        }
    }
    cells
}

/// The random phases of one source realization.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeckleSource {
    geometry: SourceGeometry,
    phases: Arc<[f64]>,
    seed: Option<u64>,
}

impl SpeckleSource {
    /// Draws i.i.d. uniform phases on `(-pi, pi]`, one per region, from the
    /// counter stream `(seed, lattice coordinate)`.
    pub fn new(geometry: &SourceGeometry, seed: u64) -> Self {
        let family = StreamFamily::new(seed, rng::DOMAIN_PHASE);
        let phases: Vec<f64> = geometry
            .lattice()
            .iter()
            .map(|c| rng::uniform_symmetric(&mut family.at(c[0], c[1]), PI))
            .collect();
        Self {
            geometry: geometry.clone(),
            phases: phases.into(),
            seed: Some(seed),
        }
    }

    /// Builds a source from explicit phases (wrapped into `(-pi, pi]`).
    pub fn from_phases(geometry: &SourceGeometry, phases: Vec<f64>) -> Result<Self> {
        if phases.len() != geometry.n_regions() {
            return Err(Error::ShapeMismatch(format!(
                "{} phases for {} regions",
                phases.len(),
                geometry.n_regions()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("phases", "non-finite phase"));
        }
        let phases: Vec<f64> = phases.into_iter().map(rng::wrap_phase).collect();
        Ok(Self {
            geometry: geometry.clone(),
            phases: phases.into(),
            seed: None,
        })
    }

    pub fn geometry(&self) -> &SourceGeometry {
        &self.geometry
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Unit phasors `exp(i phi_a)`.
    pub fn phasors(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }

    /// Shifts every phase by an independent offset uniform on `(-q, q]`.
    ///
    /// Offsets come from the `(spec.seed, lattice coordinate)` perturbation
    /// stream, which is disjoint from the base-phase stream.
    pub fn perturb(&self, spec: &PerturbationSpec) -> SpeckleSource {
        if spec.q == 0.0 {
            return self.clone();
        }
        let family = StreamFamily::new(spec.seed, rng::DOMAIN_PERTURB);
        let phases: Vec<f64> = self
            .geometry
            .lattice()
            .iter()
            .zip(self.phases.iter())
            .map(|(c, &phi)| {
                let eps = rng::uniform_symmetric(&mut family.at(c[0], c[1]), spec.q);
                rng::wrap_phase(phi + eps)
            })
            .collect();
        SpeckleSource {
            geometry: self.geometry.clone(),
            phases: phases.into(),
            seed: self.seed,
        }
    }
}

/// Strength and seed of a uniform random phase perturbation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationSpec {
    q: f64,
    seed: u64,
}

impl PerturbationSpec {
    pub fn new(q: f64, seed: u64) -> Result<Self> {
        if !(0.0..=PI).contains(&q) {
            return Err(Error::param("q", format!("must lie in [0, pi], got {q}")));
        }
        Ok(Self { q, seed })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Photon budget of one measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonBudget {
    power: f64,
    exposure: f64,
    photons_per_region: f64,
}

impl PhotonBudget {
    /// `N0 = lambda P dt / (h c N_reg)`.
    pub fn new(power: f64, exposure: f64, geometry: &SourceGeometry) -> Result<Self> {
        if !(power > 0.0 && exposure > 0.0) {
            return Err(Error::param("power/exposure", "must be positive"));
        }
        let n0 = geometry.wavelength() * power * exposure
            / (PLANCK * SPEED_OF_LIGHT * geometry.n_regions() as f64);
        let budget = Self {
            power,
            exposure,
            photons_per_region: n0,
        };
        budget.validate()?;
        Ok(budget)
    }

    /// Budget specified directly by photons per region.
    pub fn from_photons_per_region(n0: f64) -> Result<Self> {
        let budget = Self {
            power: f64::NAN,
            exposure: f64::NAN,
            photons_per_region: n0,
        };
        budget.validate()?;
        Ok(budget)
    }

    fn validate(&self) -> Result<()> {
        let n0 = self.photons_per_region;
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::param("N0", format!("must be positive, got {n0}")));
        }
        let dphi = self.phase_uncertainty();
        // The closed upper end admits the one-bit-per-region budget, 4 pi sqrt(N0) = 2.
        if !(dphi > 0.0 && dphi <= PI * (1.0 + 4.0 * f64::EPSILON)) {
            return Err(Error::param("N0", format!("phase uncertainty {dphi} outside (0, pi]")));
        }
        Ok(())
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn exposure(&self) -> f64 {
        self.exposure
    }

    pub fn photons_per_region(&self) -> f64 {
        self.photons_per_region
    }

    /// Number-phase uncertainty `1 / (2 sqrt(N0))`.
    pub fn phase_uncertainty(&self) -> f64 {
        0.5 / self.photons_per_region.sqrt()
    }
}

/// Entropy of the source in bits: `N_reg log2(4 pi sqrt(N0))`.
pub fn source_entropy_bits(geometry: &SourceGeometry, budget: &PhotonBudget) -> f64 {
    geometry.n_regions() as f64 * (4.0 * PI * budget.photons_per_region().sqrt()).log2()
}

/// Mutual information between a source and its `q`-perturbed version, in
/// bits: `N_reg log2(pi / q)`, valid for `dphi/2 <= q <= pi`.
pub fn source_mutual_information_bits(
    geometry: &SourceGeometry,
    budget: &PhotonBudget,
    q: f64,
) -> Result<f64> {
    let q_min = 0.5 * budget.phase_uncertainty();
    if !(q >= q_min) {
        return Err(Error::param(
            "q",
            format!("{q} is below the uncertainty limit {q_min}"),
        ));
    }
    if q > PI {
        return Err(Error::param("q", format!("{q} exceeds pi")));
    }
    Ok(geometry.n_regions() as f64 * (PI / q).log2())
}

/// Entropy of the perturbation offsets, `N_reg log2(2q / dphi)` bits.
pub fn perturbation_entropy_bits(
    geometry: &SourceGeometry,
    budget: &PhotonBudget,
    q: f64,
) -> Result<f64> {
    let dphi = budget.phase_uncertainty();
    if !(q >= 0.5 * dphi && q <= PI) {
        return Err(Error::param("q", format!("{q} outside [dphi/2, pi]")));
    }
    Ok(geometry.n_regions() as f64 * (2.0 * q / dphi).log2())
}
