/**
 * Minimal rigid-pose math mirroring the engine's conventions.
 *
 * Quaternions are [w, x, y, z] mapping probe-local axes to world; probe
 * frame: X = lateral (image width), Y = plane normal, Z = depth. The client
 * only uses this to steer the virtual probe between server acknowledgements;
 * the server remains authoritative for all tutoring state.
 */

export type Quat = [number, number, number, number];
export type Vec3 = [number, number, number];

export interface Pose {
  position: Vec3;
  orientation: Quat;
}

export enum Movement {
  Fan = 0, // rotate about local X
  Rock = 1, // rotate about local Y
  Rotate = 2, // rotate about local Z
  Slide = 3, // translate along local X
  Sweep = 4, // translate along local Y
  Press = 5, // translate along local Z
}

export const MOVEMENT_NAMES = ["FAN", "ROCK", "ROTATE", "SLIDE", "SWEEP", "PRESS"] as const;

export function isRotation(m: Movement): boolean {
  return m < 3;
}

export function movementAxis(m: Movement): number {
  return m % 3;
}

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function quatAboutAxis(axis: number, angle: number): Quat {
  const half = angle / 2;
  const q: Quat = [Math.cos(half), 0, 0, 0];
  q[1 + axis] = Math.sin(half);
  return q;
}

/** Columns of the rotation matrix = local X/Y/Z axes in world coordinates. */
export function quatToMatrix(q: Quat): number[][] {
  const [w, x, y, z] = q;
  return [
    [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
    [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
    [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
  ];
}

export function localAxis(q: Quat, axis: number): Vec3 {
  const m = quatToMatrix(q);
  return [m[0][axis], m[1][axis], m[2][axis]];
}

/** One standard movement relative to the pose's current local frame. */
export function applyMovement(pose: Pose, m: Movement, amount: number): Pose {
  if (isRotation(m)) {
    const q = quatNormalize(quatMultiply(pose.orientation, quatAboutAxis(movementAxis(m), amount)));
    return { position: [...pose.position], orientation: q };
  }
  const axis = localAxis(pose.orientation, movementAxis(m));
  return {
    position: [
      pose.position[0] + amount * axis[0],
      pose.position[1] + amount * axis[1],
      pose.position[2] + amount * axis[2],
    ],
    orientation: [...pose.orientation],
  };
}

export function lerpVec(a: Vec3, b: Vec3, t: number): Vec3 {
  return [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t];
}

export function poseToWire(p: Pose): { position: number[]; orientation: number[] } {
  return { position: [...p.position], orientation: [...p.orientation] };
}

export function poseFromWire(d: { position: number[]; orientation: number[] }): Pose {
  return {
    position: [d.position[0], d.position[1], d.position[2]],
    orientation: [d.orientation[0], d.orientation[1], d.orientation[2], d.orientation[3]],
  };
}
