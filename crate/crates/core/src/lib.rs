pub mod checkpoint;
pub mod cpg;
pub mod env;
pub mod kinematics;
pub mod rbfn;
pub mod reward;
pub mod rng;
pub mod sac;
pub mod sim;
pub mod trainer;
pub mod trajectory_opt;
