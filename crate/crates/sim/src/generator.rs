//! Moving-average streams `X_i = F sum_l g_l eps_{i-l}` with
//! `g_l = 1 / (M - l + 1)` and a loading `F` that may switch at a change point.

use std::collections::VecDeque;

use covshift::{Error, Observations, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::factor::{build_q, ChangeModel, Factor};

/// Innovation law. Both have mean 0 and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    #[default]
    Gaussian,
    /// Student t rescaled to unit variance; needs `dof > 4` for a finite
    /// fourth moment.
    StudentT { dof: f64 },
}

impl Innovation {
    /// Excess kurtosis `E eps^4 - 3`.
    pub fn beta(&self) -> f64 {
        match *self {
            Innovation::Gaussian => 0.0,
            Innovation::StudentT { dof } => 6.0 / (dof - 4.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Innovation::StudentT { dof } if !(dof > 4.0) => {
                Err(Error::Config(format!("Student t innovations need dof > 4, got {dof}")))
            }
            _ => Ok(()),
        }
    }
}

/// Pre-change loading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Base {
    Identity,
    /// `r^{|i-j|}`.
    Toeplitz { r: f64 },
}

impl Base {
    pub fn factor(self) -> Factor {
        match self {
            Base::Identity => Factor::Identity,
            Base::Toeplitz { r } => Factor::Toeplitz { r },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostChange {
    pub model: ChangeModel,
    pub rho: f64,
    /// Index of the last pre-change observation; training occupies
    /// `1..=n0`.
    pub change_at: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub p: usize,
    pub dep_order: usize,
    #[serde(default)]
    pub innovation: Innovation,
    pub base: Base,
    #[serde(default)]
    pub post_change: Option<PostChange>,
}

impl GeneratorSpec {
    pub fn null(p: usize, dep_order: usize, base: Base) -> Self {
        Self {
            p,
            dep_order,
            innovation: Innovation::Gaussian,
            base,
            post_change: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Config("dimension p must be positive".into()));
        }
        self.innovation.validate()?;
        if let Base::Toeplitz { r } = self.base {
            if !(r.abs() < 1.0) {
                return Err(Error::Config(format!("Toeplitz base needs |r| < 1, got {r}")));
            }
        }
        if let Some(pc) = &self.post_change {
            if !(pc.rho > 0.0 && pc.rho < 1.0) {
                return Err(Error::Config(format!("rho {} not in (0, 1)", pc.rho)));
            }
        }
        Ok(())
    }

    /// The post-change loading, drawn from `seed` when random.
    pub fn post_factor(&self, seed: u64) -> Result<Option<Factor>> {
        self.validate()?;
        match &self.post_change {
            None => Ok(None),
            Some(pc) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                build_q(pc.model, self.p, pc.rho, &mut rng).map(Some)
            }
        }
    }
}

/// `g_l = 1 / (M - l + 1)` for `l = 0..=M`.
pub fn lag_coefficients(dep_order: usize) -> Vec<f64> {
    (0..=dep_order).map(|l| 1.0 / (dep_order - l + 1) as f64).collect()
}

/// Sequential generator. `X_1` is stationary: `M` innovations are drawn
/// before it.
pub struct StreamGenerator<'a, R> {
    p: usize,
    coef: Vec<f64>,
    innovation: Innovation,
    pre: Factor,
    post: Option<(&'a Factor, usize)>,
    /// Newest innovation at the front.
    recent: VecDeque<Vec<f64>>,
    mix: Vec<f64>,
    produced: usize,
    rng: R,
}

impl<'a, R: Rng> StreamGenerator<'a, R> {
    /// `post` must be the factor for `spec.post_change` when present.
    pub fn new(spec: &GeneratorSpec, post: Option<&'a Factor>, rng: R) -> Result<Self> {
        spec.validate()?;
        let post = match (&spec.post_change, post) {
            (Some(pc), Some(q)) => Some((q, pc.change_at)),
            (None, None) => None,
            (Some(_), None) => return Err(Error::Config("post-change factor missing".into())),
            (None, Some(_)) => return Err(Error::Config("post-change factor without a change".into())),
        };
        let mut g = Self {
            p: spec.p,
            coef: lag_coefficients(spec.dep_order),
            innovation: spec.innovation,
            pre: spec.base.factor(),
            post,
            recent: VecDeque::with_capacity(spec.dep_order + 1),
            mix: vec![0.0; spec.p],
            produced: 0,
            rng,
        };
        for _ in 0..spec.dep_order {
            let e = g.draw();
            g.recent.push_front(e);
        }
        Ok(g)
    }

    fn draw(&mut self) -> Vec<f64> {
        let p = self.p;
        match self.innovation {
            Innovation::Gaussian => (0..p).map(|_| StandardNormal.sample(&mut self.rng)).collect(),
            Innovation::StudentT { dof } => {
                let t = StudentT::new(dof).expect("validated dof");
                let scale = ((dof - 2.0) / dof).sqrt();
                (0..p).map(|_| scale * t.sample(&mut self.rng)).collect()
            }
        }
    }

    /// Index of the next observation (1-based).
    pub fn next_index(&self) -> usize {
        self.produced + 1
    }

    pub fn next_into(&mut self, out: &mut [f64]) {
        let m = self.coef.len() - 1;
        let e = if self.recent.len() > m {
            let mut buf = self.recent.pop_back().expect("non-empty ring");
            self.refill(&mut buf);
            buf
        } else {
            self.draw()
        };
        self.recent.push_front(e);
        self.mix.iter_mut().for_each(|v| *v = 0.0);
        // recent[k] is eps_{i-k}, weighted by g_{k}
        for (k, eps) in self.recent.iter().enumerate() {
            let w = self.coef[k];
            for (v, x) in self.mix.iter_mut().zip(eps) {
                *v += w * x;
            }
        }
        self.produced += 1;
        let factor = match self.post {
            Some((q, tau)) if self.produced > tau => q,
            _ => &self.pre,
        };
        factor.apply(&self.mix, out);
    }

    fn refill(&mut self, buf: &mut [f64]) {
        match self.innovation {
            Innovation::Gaussian => buf.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut self.rng)),
            Innovation::StudentT { dof } => {
                let t = StudentT::new(dof).expect("validated dof");
                let scale = ((dof - 2.0) / dof).sqrt();
                buf.iter_mut().for_each(|v| *v = scale * t.sample(&mut self.rng));
            }
        }
    }

    pub fn next_row(&mut self) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        self.next_into(&mut out);
        out
    }

    pub fn take(&mut self, n: usize) -> Observations<f64> {
        let mut obs = Observations::with_capacity(self.p, n);
        let mut row = vec![0.0; self.p];
        for _ in 0..n {
            self.next_into(&mut row);
            obs.push(&row).expect("generator rows are finite");
        }
        obs
    }
}

/// `n` observations of `spec` from `seed`. The sparse post-change loading is
/// drawn from the same seed.
pub fn gen_stream(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<Observations<f64>> {
    let q = spec.post_factor(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut g = StreamGenerator::new(spec, q.as_ref(), rng)?;
    Ok(g.take(n))
}
