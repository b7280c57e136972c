#![allow(dead_code)]

use flgame_core::enumeration::{Filters, ProfileSpace, DEFAULT_BUDGET};
use flgame_core::gen::{generate, GenOptions, Shape};
use flgame_core::model::{Instance, Profile};
use proptest::prelude::*;

/// A random forest with `1..=max_voters` voters, depth at most 3.
pub fn random_instance(seed: u64, voters: usize, grid: usize) -> Instance {
    generate(&GenOptions {
        voters: Some(voters),
        depth: Some(3),
        grid: Some(grid),
        seed,
        ..GenOptions::new(Shape::Random)
    })
    .unwrap()
}

pub fn instances(max_voters: usize) -> impl Strategy<Value = Instance> {
    (any::<u64>(), 1..=max_voters, 2usize..=4).prop_map(|(seed, n, g)| random_instance(seed, n, g))
}

/// An instance with one of its legal report profiles.
pub fn instance_and_profile(max_voters: usize) -> impl Strategy<Value = (Instance, Profile)> {
    (instances(max_voters), any::<usize>()).prop_map(|(instance, pick)| {
        let space = ProfileSpace::new(&instance, &Filters::none(), DEFAULT_BUDGET).unwrap();
        let profile = space.profile(pick % space.len());
        (instance, profile)
    })
}
