/** DOM layer: builds one widget group per sensor plus the actuator and
 * thermostat groups, then keeps them in sync with the store. Elements are
 * created once and updated in place so an open slider drag is not torn down
 * by a poll tick.
 */

import {
    ALARM_BADGE_KEY,
    PanelStore,
    SensorReading,
    WidgetState,
    actuatorKey,
    labelKey,
    sliderKey,
} from "./store.js";
import { ActuatorColor, ThresholdProperty } from "./types.js";

export class PanelView {
    private built = false;
    private banner!: HTMLElement;
    private badge!: HTMLElement;
    private toastBox!: HTMLElement;
    private clock!: HTMLElement;
    private valueNodes = new Map<string, HTMLElement>();
    private sliderNodes = new Map<string, HTMLInputElement>();
    private switchNodes = new Map<string, HTMLButtonElement>();

    constructor(
        private store: PanelStore,
        private root: HTMLElement,
    ) {
        store.subscribe(() => this.render());
    }

    render(): void {
        if (!this.built) {
            if (!this.store.status) {
                this.root.textContent = "waiting for the gateway...";
                return;
            }
            this.build();
        }
        this.update();
    }

    private build(): void {
        this.root.textContent = "";
        this.banner = el("div", "banner", "gateway offline, retrying...");
        this.banner.hidden = true;
        this.root.append(this.banner);

        const header = el("header", "", "");
        header.append(el("h1", "", "house panel"));
        this.badge = el("span", "badge", "");
        this.clock = el("span", "clock", "");
        header.append(this.badge, this.clock);
        this.root.append(header);

        for (const device of this.store.status!.devices) {
            this.root.append(this.buildSensorGroup(device.id));
        }
        this.root.append(this.buildActuatorGroup(), this.buildThermostatForm());

        this.toastBox = el("div", "toasts", "");
        this.root.append(this.toastBox);
        this.built = true;
    }

    private buildSensorGroup(deviceId: string): HTMLElement {
        const section = el("section", "sensor", "");
        section.append(el("h2", "", deviceId));
        const reading = el("div", "reading", "");
        this.valueNodes.set(labelKey(deviceId), reading);
        section.append(reading);
        for (const property of ["temphigh", "templow"] as ThresholdProperty[]) {
            section.append(this.buildSlider(deviceId, property));
        }
        return section;
    }

    private buildSlider(deviceId: string, property: ThresholdProperty): HTMLElement {
        const key = sliderKey(deviceId, property);
        const row = el("label", "slider-row", "");
        row.append(el("span", "slider-name", property));
        const input = document.createElement("input");
        input.type = "range";
        input.min = "-55";
        input.max = "125";
        input.step = "1";
        const output = el("output", "", "");
        input.addEventListener("input", () => (output.textContent = input.value));
        input.addEventListener("change", () => {
            void this.store.setThreshold(deviceId, property, Number(input.value));
        });
        row.append(input, output);
        this.sliderNodes.set(key, input);
        this.valueNodes.set(`${key}:out`, output);
        return row;
    }

    private buildActuatorGroup(): HTMLElement {
        const section = el("section", "actuators", "");
        section.append(el("h2", "", "actuators"));
        for (const color of ["red", "green"] as ActuatorColor[]) {
            const key = actuatorKey(color);
            const button = document.createElement("button");
            button.className = `switch ${color}`;
            button.addEventListener("click", () => {
                const widget = this.store.widgets.get(key);
                void this.store.setActuator(color, !(widget?.value as boolean));
            });
            this.switchNodes.set(key, button);
            section.append(button);
        }
        return section;
    }

    private buildThermostatForm(): HTMLElement {
        const section = el("section", "thermostat", "");
        section.append(el("h2", "", "thermostat"));
        const sensor = document.createElement("select");
        for (const device of this.store.status!.devices) {
            const option = document.createElement("option");
            option.value = device.id;
            option.textContent = device.id;
            sensor.append(option);
        }
        const actuator = document.createElement("select");
        for (const color of ["red", "green"]) {
            const option = document.createElement("option");
            option.value = color;
            option.textContent = color;
            actuator.append(option);
        }
        const setpoint = numberInput(22, 0.5);
        const hysteresis = numberInput(1, 0.5);
        const enabled = document.createElement("input");
        enabled.type = "checkbox";
        enabled.checked = true;
        const apply = document.createElement("button");
        apply.textContent = "apply";
        apply.addEventListener("click", () => {
            void this.store.setThermostat({
                sensor: sensor.value,
                actuator: actuator.value as ActuatorColor,
                setpoint: Number(setpoint.value),
                hysteresis: Number(hysteresis.value),
                enabled: enabled.checked,
            });
        });
        const state = el("span", "thermostat-state", "");
        this.valueNodes.set("thermostat:state", state);
        section.append(
            labeled("sensor", sensor),
            labeled("actuator", actuator),
            labeled("setpoint", setpoint),
            labeled("hysteresis", hysteresis),
            labeled("enabled", enabled),
            apply,
            state,
        );
        return section;
    }

    private update(): void {
        this.banner.hidden = !this.store.offline;
        const status = this.store.status;
        if (!status) return;
        this.clock.textContent = `cycle ${status.cycle}`;

        const badge = this.store.widgets.get(ALARM_BADGE_KEY);
        const alarms = (badge?.value as string[]) ?? [];
        this.badge.textContent = alarms.length ? `ALARM: ${alarms.join(", ")}` : "no alarms";
        this.badge.classList.toggle("alarming", alarms.length > 0);

        for (const widget of this.store.widgets.values()) {
            this.updateWidget(widget);
        }

        const state = this.valueNodes.get("thermostat:state");
        if (state) {
            const rule = this.store.thermostat;
            state.textContent = this.store.thermostatPending
                ? "pending..."
                : rule
                  ? `${rule.sensor} -> ${rule.actuator} @ ${rule.setpoint}±${rule.hysteresis}${rule.enabled ? "" : " (disabled)"}`
                  : "no rule";
        }

        for (const message of this.store.takeToasts()) {
            const toast = el("div", "toast", message);
            this.toastBox.append(toast);
            setTimeout(() => toast.remove(), 4000);
        }
    }

    private updateWidget(widget: WidgetState): void {
        if (widget.kind === "sensor-label") {
            const node = this.valueNodes.get(widget.key);
            if (!node) return;
            const reading = widget.value as SensorReading;
            const text =
                reading.temperature === null ? "-" : `${reading.temperature.toFixed(1)} °C`;
            node.textContent = `${text}${reading.stale ? " (stale)" : ""}`;
            node.classList.toggle("stale", reading.stale);
            node.classList.toggle("alarming", reading.inAlarm);
        } else if (widget.kind === "slider") {
            const input = this.sliderNodes.get(widget.key);
            const output = this.valueNodes.get(`${widget.key}:out`);
            if (!input || !output) return;
            input.disabled = widget.pending;
            if (document.activeElement !== input && widget.value !== null) {
                input.value = String(widget.value);
            }
            output.textContent = widget.pending ? "pending..." : String(widget.value ?? "-");
        } else if (widget.kind === "switch") {
            const button = this.switchNodes.get(widget.key);
            if (!button) return;
            const on = widget.value as boolean;
            const color = widget.key.split(":")[1];
            button.textContent = widget.pending ? `${color}: pending...` : `${color}: ${on ? "on" : "off"}`;
            button.classList.toggle("on", on);
            button.disabled = widget.pending;
        }
    }
}

function el(tag: string, className: string, text: string): HTMLElement {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text) node.textContent = text;
    return node;
}

function labeled(name: string, control: HTMLElement): HTMLElement {
    const wrap = el("label", "field", "");
    wrap.append(el("span", "", name), control);
    return wrap;
}

function numberInput(value: number, step: number): HTMLInputElement {
    const input = document.createElement("input");
    input.type = "number";
    input.value = String(value);
    input.step = String(step);
    return input;
}
