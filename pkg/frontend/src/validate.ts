// Client-side WGS84 checks for the export panel; the server re-validates.

export interface OriginInput {
  lat: number;
  lon: number;
  level: number;
}

// the backend's local tangent projection degrades near the poles, so the
// usable latitude band is tighter than the datum's
export const MAX_LATITUDE = 85.0;

export function validateOrigin(input: OriginInput): string[] {
  const problems: string[] = [];
  if (!Number.isFinite(input.lat) || Math.abs(input.lat) > MAX_LATITUDE) {
    problems.push(`latitude must be within ±${MAX_LATITUDE} degrees`);
  }
  if (!Number.isFinite(input.lon) || Math.abs(input.lon) > 180.0) {
    problems.push("longitude must be within ±180 degrees");
  }
  if (!Number.isInteger(input.level)) {
    problems.push("level must be an integer");
  }
  return problems;
}
