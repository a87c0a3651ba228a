//! The two bundled case-study models, emitted in the text format so the
//! same parsing and compilation path covers them.

/// Two trains, one bridge: signals on each track hold a train at the
/// gate semaphore; sensors may be mounted at either semaphore; the
/// controller owns a resettable timer observed at granularity 2.
///
/// Reconstruction choices (the published description leaves these open):
/// the first semaphore is a sensor post only, trains stop at the gate
/// semaphore in front of the bridge; segment and bridge transits take
/// [1, 2) time units; signals start red; a held train must be released
/// within 2 time units, violations and bridge collisions drive the
/// plant into a `bad` flag monitored by the safety predicate.
pub const TRAINGATE: &str = include_str!("../models/traingate.game");

/// Conveyor with light and heavy boxes processed in `n` steps: light
/// processing takes [1, 2), heavy [4, 5) per step; the box must move on
/// (or be removed after the last step) within 3 time units of finishing.
/// Rotating early, rotating an empty conveyor, rotating at the last step,
/// or removing anywhere else drives the plant into `bad`. Timer
/// predicates of granularity 1, 2, 3 cost 3, 2, 1.
pub fn lightheavy(steps: u32) -> String {
    assert!(steps >= 2, "the conveyor model needs at least two steps");
    let last = steps - 1;
    let before_last = steps - 2;
    format!(
        r#"# conveyor with light and heavy boxes, {steps} processing steps
name lightheavy
clock z y
var present 0..1 init 0
var heavy 0..1 init 0
var done 0..1 init 0
var step 0..{last} init 0
var bad 0..1 init 0
location m
init m

# processing must finish within its window
invariant m when present=1 & done=0 & heavy=0 & bad=0: z < 2
invariant m when present=1 & done=0 & heavy=1 & bad=0: z < 5

# a box of either kind may arrive whenever the belt is empty
edge m -> m: arrive u when present=0 & bad=0 do present := 1, heavy := 0, done := 0, step := 0 reset z
edge m -> m: arrive u when present=0 & bad=0 do present := 1, heavy := 1, done := 0, step := 0 reset z
# processing completes inside [1,2) or [4,5)
edge m -> m: finish u when present=1 & done=0 & heavy=0 & bad=0 guard 1 <= z do done := 1 reset z
edge m -> m: finish u when present=1 & done=0 & heavy=1 & bad=0 guard 4 <= z do done := 1 reset z
# moving on more than 3 after finishing is a fault
edge m -> m: late u when present=1 & done=1 & bad=0 guard z > 3 do bad := 1

# rotating the belt: legitimate only with a finished box short of the end
edge m -> m: move c when present=1 & done=1 & step<={before_last} & bad=0 do step := step + 1, done := 0 reset z
edge m -> m: move c when present=1 & done=0 & bad=0 do bad := 1
edge m -> m: move c when present=0 & bad=0 do bad := 1
edge m -> m: move c when present=1 & done=1 & step={last} & bad=0 do bad := 1
# removing the box: legitimate only at the last step once finished
edge m -> m: remove c when present=1 & done=1 & step={last} & bad=0 do present := 0, heavy := 0, done := 0, step := 0
edge m -> m: remove c when present=1 & done=0 & bad=0 do bad := 1
edge m -> m: remove c when present=0 & bad=0 do bad := 1
edge m -> m: remove c when present=1 & done=1 & step<={before_last} & bad=0 do bad := 1
# the controller's stopwatch
edge m -> m: reset c when bad=0 reset y

predicate safe cost 0 loc bad=0
predicate pos0 cost 1 loc present=1 & step=0
predicate heavy cost 1 loc heavy=1
predicate ylt1 cost 3 clock y < 1
predicate ylt2 cost 2 clock y < 2
predicate ylt3 cost 1 clock y < 3
safety safe
"#
    )
}
