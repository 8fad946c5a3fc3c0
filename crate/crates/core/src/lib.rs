//! Single-user M-ary bi-orthogonal Walsh signaling.
//!
//! When narrowband interference occupies enough of a spread band that CDMA
//! can carry only one user, the whole Hadamard code set is handed to that
//! user: `2^(K-1)` rows plus their complements form a `2^K`-ary
//! constellation carrying `K` bits per code interval.
//!
//! * [`codebook`]: Hadamard constructions and constellation selection.
//! * [`capacity`]: interference densities, effective SINR, pole capacity.
//! * [`waveform`]: BPSK and continuous-phase FSK chip modulation.
//! * [`channel`]: AWGN, narrowband interferers, carrier and timing offsets.
//! * [`receiver`]: sync acquisition and the bi-orthogonal correlator bank.
//! * [`fec`]: regular LDPC outer code with a normalized min-sum decoder.
//! * [`sim`]: experiment runners behind the `mary-sim` CLI.

pub mod capacity;
pub mod channel;
pub mod codebook;
pub mod fec;
pub mod receiver;
pub mod sim;
pub mod waveform;
