use regkrylov::csv::Table;
use regkrylov_flow::synth::GRAY_MAX;
use regkrylov_flow::Speckle;

use super::Outputs;
use crate::args::SynthArgs;
use crate::manifest::RunManifest;
use crate::pgm::{encode, Pgm};
use crate::{Error, Result};

pub fn run(args: &SynthArgs, mut out: Outputs) -> Result<RunManifest> {
    if args.width < 2 || args.height < 2 {
        return Err(Error::Usage(format!(
            "frames need at least 2x2 pixels, got {}x{}",
            args.width, args.height
        )));
    }
    let speckle = Speckle::standard(args.width, args.height, args.seed);
    let maxval = if args.bits == 8 { 255 } else { 65535 };
    for (name, (tx, ty)) in [
        ("frame1.pgm", (0.0, 0.0)),
        ("frame2.pgm", (args.tx, args.ty)),
    ] {
        let img = speckle.render(tx, ty);
        let pgm = Pgm::quantize(args.width, args.height, img.values(), 0.0, GRAY_MAX, maxval);
        let bytes = encode(&pgm).map_err(|source| Error::Pgm {
            path: name.into(),
            source,
        })?;
        out.write(name, &bytes)?;
    }
    let mut truth = Table::new(&["tx", "ty"]);
    truth.push_reals(&[args.tx, args.ty]);
    out.table("truth.csv", &truth)?;
    out.finish()
}
