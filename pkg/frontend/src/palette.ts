/** Fixed structure ids, names, and display colors (matches server reports). */

export const STRUCTURE_NAMES: Record<number, string> = {
  0: "BG",
  1: "RA",
  2: "LA",
  3: "RV",
  4: "LV",
  5: "TV",
  6: "PV",
  7: "MV",
  8: "AV",
  9: "MYO",
};

export const STRUCTURE_COLORS: Record<number, [number, number, number]> = {
  0: [0, 0, 0],
  1: [66, 135, 245],
  2: [52, 211, 153],
  3: [129, 140, 248],
  4: [249, 115, 22],
  5: [239, 68, 68],
  6: [234, 179, 8],
  7: [217, 70, 239],
  8: [20, 184, 166],
  9: [120, 113, 108],
};

export function colorCss(id: number): string {
  const [r, g, b] = STRUCTURE_COLORS[id] ?? [255, 255, 255];
  return `rgb(${r}, ${g}, ${b})`;
}
