//! Every example must keep running.

macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $name() {
            $name::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(simulate, "simulate.rs");
example!(extract, "extract.rs");
example!(describe, "describe.rs");
example!(calibrate, "calibrate.rs");
example!(classifiers, "classifiers.rs");
example!(ensembles, "ensembles.rs");
example!(evaluate, "evaluate.rs");
example!(roc, "roc.rs");
example!(horizon, "horizon.rs");
example!(pipeline, "pipeline.rs");
