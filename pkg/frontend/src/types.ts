/** Shapes of the gateway's JSON surface. */

export interface DeviceStatus {
    id: string;
    temperature: number | null;
    temphigh: number | null;
    templow: number | null;
    stale: boolean;
    in_alarm: boolean;
    last_cycle: number;
}

export interface ThermostatRule {
    sensor: string;
    actuator: "red" | "green";
    setpoint: number;
    hysteresis: number;
    enabled: boolean;
}

export interface GatewayStatus {
    devices: DeviceStatus[];
    alarm: string[];
    actuators: Record<string, boolean>;
    thermostat: ThermostatRule | null;
    cycle: number;
    clock_ms: number;
    rooms: Record<string, number>;
    running: boolean;
}

export type ActuatorColor = "red" | "green";
export type ThresholdProperty = "temphigh" | "templow";
